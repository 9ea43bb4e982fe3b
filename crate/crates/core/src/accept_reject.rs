//! Acceptance/rejection samplers expressed as recursive schemes.
//!
//! Four variants: fixed uniform proposal over a superset, adaptive integer
//! parameter, envelope rejection over a finite density, and envelope
//! rejection with per-rejection envelope refinement.

use thiserror::Error;

use crate::density::{DensityError, EnvelopePair, FiniteDensity};
use crate::engine::{EngineError, PrsSpec, Step};
use crate::num::Real;
use crate::rng::UniformSource;

#[derive(Debug, Error)]
pub enum ArError {
    #[error("initial parameter must be a positive integer")]
    InvalidAlpha,
    #[error("refinement rule changed the target density")]
    RuleChangedTarget,
    #[error("refinement rule raised the envelope at {label:?}")]
    RuleRaisedEnvelope { label: String },
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Rejection sampler for uniform{1..5}: proposes uniform{1..10}, accepts
/// values at most 5, retries otherwise. The parameter is carried but never
/// used; every recursive call is the same problem.
#[derive(Debug, Clone, Copy)]
pub struct BasicRejection;

/// Values the basic sampler accepts (and the size of its target).
pub const BASIC_ACCEPT_MAX: u64 = 5;
/// Size of the basic sampler's proposal range.
pub const BASIC_PROPOSAL_MAX: u64 = 10;

pub fn ar_basic() -> BasicRejection {
    BasicRejection
}

impl PrsSpec for BasicRejection {
    type Param = ();
    type Output = u64;
    type Src = UniformSource;

    fn body(&self, _param: &(), src: &mut UniformSource) -> Step<(), u64, UniformSource> {
        let x = src.uniform_int(BASIC_PROPOSAL_MAX) + 1;
        if x <= BASIC_ACCEPT_MAX {
            Step::Done(x)
        } else {
            Step::recurse(())
        }
    }
}

/// Rejection sampler for uniform{1..5} whose proposal range shrinks as it
/// runs: a call with parameter a proposes uniform{1..max(5, a)}, accepts
/// values at most 5, and otherwise recurses with the rejected value as the
/// new parameter. Parameters along a run never exceed their caller's draw.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveParamRejection {
    alpha0: u64,
}

pub fn ar_adaptive_param(alpha0: u64) -> Result<AdaptiveParamRejection, ArError> {
    if alpha0 == 0 {
        return Err(ArError::InvalidAlpha);
    }
    Ok(AdaptiveParamRejection { alpha0 })
}

impl AdaptiveParamRejection {
    /// Parameter for the initial call.
    pub fn alpha0(&self) -> u64 {
        self.alpha0
    }
}

impl PrsSpec for AdaptiveParamRejection {
    type Param = u64;
    type Output = u64;
    type Src = UniformSource;

    fn body(&self, param: &u64, src: &mut UniformSource) -> Step<u64, u64, UniformSource> {
        if *param == 0 {
            return Step::Fail(EngineError::spec(ArError::InvalidAlpha));
        }
        let range = (*param).max(BASIC_ACCEPT_MAX);
        let x = src.uniform_int(range) + 1;
        if x <= BASIC_ACCEPT_MAX {
            Step::Done(x)
        } else {
            Step::recurse(x)
        }
    }
}

/// Envelope rejection sampler: proposes from the envelope g, accepts a
/// proposal x when a fresh uniform falls below h(x)/g(x). Output indexes the
/// shared domain and is distributed as the normalized target.
#[derive(Debug, Clone)]
pub struct EnvelopeRejection<R: Real> {
    pair: EnvelopePair<R>,
}

pub fn ar_general<R: Real>(pair: EnvelopePair<R>) -> EnvelopeRejection<R> {
    EnvelopeRejection { pair }
}

impl<R: Real> EnvelopeRejection<R> {
    pub fn pair(&self) -> &EnvelopePair<R> {
        &self.pair
    }
}

impl<R: Real> PrsSpec for EnvelopeRejection<R> {
    type Param = ();
    type Output = usize;
    type Src = UniformSource;

    fn body(&self, _param: &(), src: &mut UniformSource) -> Step<(), usize, UniformSource> {
        let idx = self.pair.envelope().sample_exact(src);
        assert!(
            self.pair.envelope().weight(idx) > R::zero(),
            "proposal landed on zero envelope weight"
        );
        let u: R = src.uniform_unit();
        if u < self.pair.ratio_at(idx) {
            Step::Done(idx)
        } else {
            Step::recurse(())
        }
    }
}

/// Envelope refinement: given the current pair and the rejected point,
/// produce the next envelope for the same target.
pub trait EnvelopeRule<R: Real> {
    fn refine(
        &self,
        current: &EnvelopePair<R>,
        rejected: usize,
    ) -> Result<EnvelopePair<R>, DensityError>;
}

/// Refinement that changes nothing; the adaptive sampler degenerates to the
/// plain envelope sampler.
#[derive(Debug, Clone, Copy)]
pub struct IdentityRule;

impl<R: Real> EnvelopeRule<R> for IdentityRule {
    fn refine(
        &self,
        current: &EnvelopePair<R>,
        _rejected: usize,
    ) -> Result<EnvelopePair<R>, DensityError> {
        Ok(current.clone())
    }
}

/// Refinement that halves the envelope at the rejected point, clamped so it
/// never drops below the target there: g'(x) = max(h(x), g(x)/2).
#[derive(Debug, Clone, Copy)]
pub struct HalvingClamp;

impl<R: Real> EnvelopeRule<R> for HalvingClamp {
    fn refine(
        &self,
        current: &EnvelopePair<R>,
        rejected: usize,
    ) -> Result<EnvelopePair<R>, DensityError> {
        let target = current.target();
        let mut weights = current.envelope().weights().to_vec();
        let halved = weights[rejected] / (R::one() + R::one());
        weights[rejected] = target.weight(rejected).max(halved);
        let labels: Vec<String> = current.envelope().labels().to_vec();
        let envelope = FiniteDensity::new(labels, weights)?;
        EnvelopePair::new(target.clone(), envelope)
    }
}

/// Envelope rejection with refinement: on each rejection the rule produces
/// the next envelope, and the recursive call samples under it. Every refined
/// envelope is revalidated: same target, pointwise between target and the
/// current envelope. Acceptance probability along a run can only rise.
#[derive(Debug, Clone)]
pub struct AdaptiveEnvelopeRejection<R: Real, Rule> {
    initial: EnvelopePair<R>,
    rule: Rule,
}

pub fn ar_adaptive_envelope<R: Real, Rule: EnvelopeRule<R>>(
    initial: EnvelopePair<R>,
    rule: Rule,
) -> AdaptiveEnvelopeRejection<R, Rule> {
    AdaptiveEnvelopeRejection { initial, rule }
}

impl<R: Real, Rule> AdaptiveEnvelopeRejection<R, Rule> {
    /// Parameter for the initial call.
    pub fn initial_pair(&self) -> &EnvelopePair<R> {
        &self.initial
    }
}

fn same_density<R: Real>(a: &FiniteDensity<R>, b: &FiniteDensity<R>) -> bool {
    a.labels() == b.labels() && a.weights() == b.weights()
}

/// Check a refined pair against the pair it came from.
fn validate_refinement<R: Real>(
    current: &EnvelopePair<R>,
    refined: &EnvelopePair<R>,
) -> Result<(), ArError> {
    if !same_density(current.target(), refined.target()) {
        return Err(ArError::RuleChangedTarget);
    }
    for i in 0..current.target().len() {
        // h <= g_a holds by construction of the pair; g_a <= g is the rule's
        // extra obligation.
        if refined.envelope().weight(i) > current.envelope().weight(i) {
            return Err(ArError::RuleRaisedEnvelope {
                label: current.target().label(i).to_string(),
            });
        }
    }
    Ok(())
}

impl<R: Real, Rule: EnvelopeRule<R>> PrsSpec for AdaptiveEnvelopeRejection<R, Rule> {
    type Param = EnvelopePair<R>;
    type Output = usize;
    type Src = UniformSource;

    fn body(
        &self,
        param: &EnvelopePair<R>,
        src: &mut UniformSource,
    ) -> Step<EnvelopePair<R>, usize, UniformSource> {
        let idx = param.envelope().sample_exact(src);
        assert!(
            param.envelope().weight(idx) > R::zero(),
            "proposal landed on zero envelope weight"
        );
        let u: R = src.uniform_unit();
        if u < param.ratio_at(idx) {
            return Step::Done(idx);
        }
        let refined = match self.rule.refine(param, idx) {
            Ok(pair) => pair,
            Err(err) => return Step::Fail(EngineError::spec(ArError::from(err))),
        };
        if let Err(err) = validate_refinement(param, &refined) {
            return Step::Fail(EngineError::spec(err));
        }
        Step::recurse(refined)
    }
}
