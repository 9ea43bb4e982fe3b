//! Bernoulli factories: exact Bern(f(p)) bits built from a coin whose bias
//! p is hidden behind the flip interface.
//!
//! Two schemes: an odds factory for Cp/(1+Cp), and a power factory for
//! (Cp)^i that alternates between a gambler's-ruin walk on the exponent
//! (low i) and a thinning step that rescales its parameters (high i). The
//! linear factory Bern(Cp) is the power factory at exponent one.

use thiserror::Error;

use crate::engine::{PrsSpec, Step};
use crate::num::{real, Real};
use crate::rng::{CoinStream, DrawAccounting, UniformSource};

/// Exponent threshold scale: the low branch hands off to the high branch
/// once i exceeds `THRESHOLD_SCALE / eps`.
pub const THRESHOLD_SCALE: f64 = 3.55;

#[derive(Debug, Error, PartialEq)]
pub enum FactoryError {
    #[error("C must be at least 1, got {0}")]
    ScaleTooSmall(String),
    #[error("C must be positive, got {0}")]
    ScaleNotPositive(String),
    #[error("eps must lie in (0, 1), got {0}")]
    SlackOutOfRange(String),
}

/// Randomness carried by a factory run: ordinary uniforms for the known
/// probability draws, and the hidden-bias coin for everything that touches
/// p. Keeping them separate is what enforces that factories learn about p
/// only through flips.
#[derive(Debug)]
pub struct FactorySources<R: Real> {
    pub uniform: UniformSource,
    pub coin: CoinStream<R>,
}

impl<R: Real> FactorySources<R> {
    pub fn new(uniform: UniformSource, coin: CoinStream<R>) -> Self {
        Self { uniform, coin }
    }
}

impl<R: Real> DrawAccounting for FactorySources<R> {
    fn uniform_draws(&self) -> u64 {
        self.uniform.draws() + DrawAccounting::uniform_draws(&self.coin)
    }
    fn coin_flips(&self) -> u64 {
        self.coin.flips()
    }
}

/// One round of the odds factory: returns the output bit, or None when the
/// round was inconclusive and must be retried.
fn odds_round<R: Real>(c: R, src: &mut FactorySources<R>) -> Option<u8> {
    let gate = src.uniform.bern_known(c / (R::one() + c));
    if !gate {
        return Some(0);
    }
    if src.coin.flip() {
        Some(1)
    } else {
        None
    }
}

/// Factory for Bern(Cp/(1+Cp)): gate on a known Bern(C/(1+C)); a gated flip
/// of heads emits 1, a gated tails retries, an ungated round emits 0.
#[derive(Debug, Clone, Copy)]
pub struct OddsFactory<R: Real> {
    c: R,
}

pub fn bf1<R: Real>(c: R) -> Result<OddsFactory<R>, FactoryError> {
    if !(c.is_finite() && c > R::zero()) {
        return Err(FactoryError::ScaleNotPositive(format!("{c}")));
    }
    Ok(OddsFactory { c })
}

impl<R: Real> OddsFactory<R> {
    pub fn c(&self) -> R {
        self.c
    }
}

impl<R: Real> PrsSpec for OddsFactory<R> {
    type Param = ();
    type Output = u8;
    type Src = FactorySources<R>;

    fn body(&self, _param: &(), src: &mut FactorySources<R>) -> Step<(), u8, FactorySources<R>> {
        match odds_round(self.c, src) {
            Some(bit) => Step::Done(bit),
            None => Step::recurse(()),
        }
    }
}

/// Parameters of one power-factory call: scale C >= 1, exponent i, and the
/// slack eps in (0,1) backing the promise Cp <= 1 - eps. The promise itself
/// is the caller's contract; nothing here can check it, because p is hidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoryParams<R: Real> {
    c: R,
    i: u64,
    eps: R,
}

impl<R: Real> FactoryParams<R> {
    pub fn new(c: R, i: u64, eps: R) -> Result<Self, FactoryError> {
        if !(c.is_finite() && c >= R::one()) {
            return Err(FactoryError::ScaleTooSmall(format!("{c}")));
        }
        if !(eps > R::zero() && eps < R::one()) {
            return Err(FactoryError::SlackOutOfRange(format!("{eps}")));
        }
        Ok(Self { c, i, eps })
    }

    pub fn c(&self) -> R {
        self.c
    }

    pub fn i(&self) -> u64 {
        self.i
    }

    pub fn eps(&self) -> R {
        self.eps
    }

    /// The target success probability (Cp)^i, computable only harness-side
    /// where p is known.
    pub fn target_mean(&self, p: R) -> R {
        (self.c * p).powi(self.i as i32)
    }

    /// Whether the promise Cp <= 1 - eps holds for a harness-known p.
    pub fn promise_holds(&self, p: R) -> bool {
        self.c * p <= R::one() - self.eps
    }
}

/// Derived constants of a power-factory call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoryConstants<R: Real> {
    /// i above this takes the thinning branch: THRESHOLD_SCALE / eps.
    pub threshold: R,
    /// Rescale factor (1 - eps/2) / (1 - eps); always above one.
    pub beta: R,
}

impl<R: Real> FactoryConstants<R> {
    pub fn for_slack(eps: R) -> Self {
        let one = R::one();
        let two = real::<R>(2.0);
        Self {
            threshold: real::<R>(THRESHOLD_SCALE) / eps,
            beta: (one - eps / two) / (one - eps),
        }
    }
}

/// Factory for Bern((Cp)^i).
///
/// i = 0 answers 1 outright. Large i (above threshold/eps) draws a known
/// Bern(beta^-i) gate: tails is a hard 0, heads recurses with scale beta*C
/// and slack eps/2. Otherwise one odds-factory bit walks the exponent to
/// i+1 or i-1 and the call recurses at the new exponent.
#[derive(Debug, Clone, Copy)]
pub struct PowerFactory<R: Real> {
    initial: FactoryParams<R>,
}

pub fn bf2<R: Real>(params: FactoryParams<R>) -> PowerFactory<R> {
    PowerFactory { initial: params }
}

/// Factory for Bern(Cp): the power factory at exponent one.
pub fn linear_factory<R: Real>(c: R, eps: R) -> Result<PowerFactory<R>, FactoryError> {
    Ok(bf2(FactoryParams::new(c, 1, eps)?))
}

impl<R: Real> PowerFactory<R> {
    /// Parameters for the initial call.
    pub fn initial(&self) -> FactoryParams<R> {
        self.initial
    }
}

impl<R: Real> PrsSpec for PowerFactory<R> {
    type Param = FactoryParams<R>;
    type Output = u8;
    type Src = FactorySources<R>;

    fn body(
        &self,
        param: &FactoryParams<R>,
        src: &mut FactorySources<R>,
    ) -> Step<FactoryParams<R>, u8, FactorySources<R>> {
        if param.i == 0 {
            return Step::Done(1);
        }
        let consts = FactoryConstants::for_slack(param.eps);
        if real::<R>(param.i as f64) > consts.threshold {
            // beta^-i in log space; i can be large when eps is small.
            let gate_p = (-real::<R>(param.i as f64) * consts.beta.ln()).exp();
            if !src.uniform.bern_known(gate_p) {
                return Step::Done(0);
            }
            let two = real::<R>(2.0);
            return Step::recurse(FactoryParams {
                c: consts.beta * param.c,
                i: param.i,
                eps: param.eps / two,
            });
        }
        // Walk the exponent with one completed odds-factory bit.
        let bit = loop {
            if let Some(bit) = odds_round(param.c, src) {
                break bit;
            }
        };
        let next_i = param.i + 1 - 2 * bit as u64;
        Step::recurse(FactoryParams {
            c: param.c,
            i: next_i,
            eps: param.eps,
        })
    }
}
