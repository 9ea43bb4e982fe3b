//! Scalar abstraction shared by the samplers and the numeric analyses.
//!
//! Everything downstream is generic over [`Real`] so the same code runs in
//! `f32` and `f64`. The crate root re-exports `f64` aliases for the common
//! case.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar type the library is generic over.
///
/// Beyond the arithmetic supplied by `num_traits`, a scalar must know how to
/// turn a raw 64-bit random word into a uniform value in `[0, 1)`. Keeping
/// that conversion on the trait means each width uses exactly as many bits
/// as its mantissa holds, so no output value is over- or under-represented.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Map a full-entropy 64-bit word to a uniform value in `[0, 1)`.
    fn unit_from_bits(bits: u64) -> Self;
}

impl Real for f64 {
    #[inline]
    fn unit_from_bits(bits: u64) -> Self {
        // Top 53 bits fill the mantissa exactly.
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl Real for f32 {
    #[inline]
    fn unit_from_bits(bits: u64) -> Self {
        // Top 24 bits: the f32 mantissa plus its implicit leading one.
        (bits >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
    }
}

/// Convert an `f64` literal into the working scalar type.
///
/// Panics if the value is not representable, which for the shipped impls
/// cannot happen.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("literal representable in scalar type")
}
