//! Randomness plumbing: a counted uniform source, derived sub-streams, and
//! the hidden-parameter coin used by the Bernoulli factories.

use std::cell::Cell;
use std::fmt;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::num::Real;

/// Seed for a reproducible stream.
pub type Seed = u64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 step; used only to derive child seeds, never for output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RngError {
    #[error("coin bias must lie in [0, 1], got {0}")]
    BiasOutOfRange(String),
}

/// Counted source of uniform randomness.
///
/// Every consumer in the crate draws through this wrapper, so a run can
/// report exactly how much randomness it spent and a rerun on the same seed
/// replays the identical stream.
#[derive(Clone)]
pub struct UniformSource {
    rng: ChaCha12Rng,
    seed: Seed,
    draws: u64,
}

impl UniformSource {
    pub fn new(seed: Seed) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            seed,
            draws: 0,
        }
    }

    /// Seed this source was created from.
    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Number of 64-bit words drawn so far, rejection retries included.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Next raw 64-bit word.
    pub fn next_bits(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform scalar in `[0, 1)`.
    pub fn uniform_unit<R: Real>(&mut self) -> R {
        R::unit_from_bits(self.next_bits())
    }

    /// Uniform integer in `{0, 1, .., n-1}`, exactly equidistributed.
    ///
    /// Uses zone rejection: a word is accepted only if it falls below the
    /// largest multiple of `n` that fits in 2^64, so no residue is favored.
    ///
    /// Panics if `n == 0`.
    pub fn uniform_int(&mut self, n: u64) -> u64 {
        assert!(n > 0, "uniform_int needs a nonempty range");
        if n == 1 {
            return 0;
        }
        let zone = ((1u128 << 64) / n as u128) * n as u128;
        loop {
            let x = self.next_bits();
            if (x as u128) < zone {
                return x % n;
            }
        }
    }

    /// Bernoulli draw with a bias known to the caller.
    pub fn bern_known<R: Real>(&mut self, p: R) -> bool {
        self.uniform_unit::<R>() < p
    }

    /// Derive an independent child stream.
    ///
    /// The child is a pure function of `(seed, k)`: it does not consume any
    /// randomness from the parent, and the same `k` always yields the same
    /// stream. Used to hand each replicate of an experiment its own seed.
    pub fn derive_stream(&self, k: u64) -> UniformSource {
        let mut state = self.seed ^ k.wrapping_mul(GOLDEN_GAMMA);
        let a = splitmix64(&mut state);
        let b = splitmix64(&mut state);
        UniformSource::new(a ^ b.rotate_left(32))
    }
}

impl fmt::Debug for UniformSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UniformSource")
            .field("seed", &self.seed)
            .field("draws", &self.draws)
            .finish()
    }
}

/// Bernoulli coin whose bias is deliberately inaccessible.
///
/// The factories must work from flips alone, so the bias is stored privately
/// and the only production accessor is [`CoinStream::flip`]. Test harnesses
/// may call [`CoinStream::peek_bias`], which counts how often it was used;
/// the factory tests assert that count stays at zero.
pub struct CoinStream<R: Real> {
    bias: R,
    src: UniformSource,
    flips: u64,
    bias_reads: Cell<u64>,
}

impl<R: Real> CoinStream<R> {
    pub fn new(bias: R, src: UniformSource) -> Result<Self, RngError> {
        if !(bias >= R::zero() && bias <= R::one()) {
            return Err(RngError::BiasOutOfRange(format!("{bias}")));
        }
        Ok(Self {
            bias,
            src,
            flips: 0,
            bias_reads: Cell::new(0),
        })
    }

    /// One coin flip: `true` with the hidden bias.
    pub fn flip(&mut self) -> bool {
        self.flips += 1;
        let u: R = self.src.uniform_unit();
        u < self.bias
    }

    /// Flips consumed so far.
    pub fn flips(&self) -> u64 {
        self.flips
    }

    /// Expose the hidden bias for verification, recording the access.
    pub fn peek_bias(&self) -> R {
        self.bias_reads.set(self.bias_reads.get() + 1);
        self.bias
    }

    /// How many times the hidden bias was peeked at.
    pub fn bias_reads(&self) -> u64 {
        self.bias_reads.get()
    }
}

impl<R: Real> fmt::Debug for CoinStream<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Bias intentionally omitted.
        f.debug_struct("CoinStream")
            .field("flips", &self.flips)
            .finish()
    }
}

/// Read-side accounting over any randomness carrier.
///
/// The recursion engine snapshots these counters before and after a run to
/// report how much randomness the run consumed, without knowing what the
/// carrier actually is.
pub trait DrawAccounting {
    /// Uniform 64-bit words drawn.
    fn uniform_draws(&self) -> u64;
    /// Hidden-bias coin flips taken.
    fn coin_flips(&self) -> u64;
}

impl DrawAccounting for UniformSource {
    fn uniform_draws(&self) -> u64 {
        self.draws()
    }
    fn coin_flips(&self) -> u64 {
        0
    }
}

impl<R: Real> DrawAccounting for CoinStream<R> {
    fn uniform_draws(&self) -> u64 {
        self.src.draws()
    }
    fn coin_flips(&self) -> u64 {
        self.flips()
    }
}
