//! Exact sampling built on locally correct recursive schemes.
//!
//! The crate provides a small recursion engine with oracle truncation,
//! acceptance/rejection samplers, coupling-from-the-past over finite chains,
//! Bernoulli factories that work from coin flips alone, absorbing-walk cost
//! analysis, and the statistical checks used to verify all of the above.

pub mod accept_reject;
pub mod cftp;
pub mod density;
pub mod engine;
pub mod factory;
pub mod num;
pub mod rng;
pub mod ruin;
pub mod stats;

pub use num::{real, Real};

/// Hidden-bias coin over the default scalar.
pub type Coin = rng::CoinStream<f64>;
/// Finite density over the default scalar.
pub type Density = density::FiniteDensity<f64>;
/// Target/envelope pair over the default scalar.
pub type Envelope = density::EnvelopePair<f64>;
/// Absorbing birth-death walk over the default scalar.
pub type Walk = ruin::RuinChain<f64>;
