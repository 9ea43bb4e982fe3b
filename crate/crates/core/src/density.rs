//! Finite unnormalized densities over labeled points, and envelope pairs
//! for rejection sampling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, Real};
use crate::rng::UniformSource;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("domain has {domain} labels but {weights} weights")]
    LengthMismatch { domain: usize, weights: usize },
    #[error("domain is empty")]
    EmptyDomain,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("weight for {label:?} is {value}; weights must be finite and nonnegative")]
    BadWeight { label: String, value: f64 },
    #[error("all weights are zero")]
    ZeroMass,
    #[error("domains differ at position {0}")]
    DomainMismatch(usize),
    #[error("envelope below target at {label:?}: target {target} > envelope {envelope}")]
    EnvelopeViolation {
        label: String,
        target: f64,
        envelope: f64,
    },
    #[error("invalid density JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Deserialize, Serialize)]
struct DensityFile {
    domain: Vec<String>,
    weights: Vec<f64>,
}

/// Unnormalized density on a finite, ordered, labeled domain.
///
/// Weights may be any nonnegative reals with positive total; normalization
/// happens on demand, so the same object serves as a sampling target and as
/// a proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDensity<R: Real> {
    domain: Vec<String>,
    weights: Vec<R>,
    total: R,
}

impl<R: Real> FiniteDensity<R> {
    pub fn new<S: Into<String>>(
        domain: Vec<S>,
        weights: Vec<R>,
    ) -> Result<Self, DensityError> {
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        if domain.len() != weights.len() {
            return Err(DensityError::LengthMismatch {
                domain: domain.len(),
                weights: weights.len(),
            });
        }
        if domain.is_empty() {
            return Err(DensityError::EmptyDomain);
        }
        for (i, label) in domain.iter().enumerate() {
            if domain[..i].contains(label) {
                return Err(DensityError::DuplicateLabel(label.clone()));
            }
        }
        let mut total = R::zero();
        for (label, &w) in domain.iter().zip(&weights) {
            if !(w.is_finite() && w >= R::zero()) {
                return Err(DensityError::BadWeight {
                    label: label.clone(),
                    value: w.to_f64().unwrap_or(f64::NAN),
                });
            }
            total += w;
        }
        if total <= R::zero() {
            return Err(DensityError::ZeroMass);
        }
        Ok(Self {
            domain,
            weights,
            total,
        })
    }

    /// Parse the on-disk form: `{"domain": [..labels..], "weights": [..reals..]}`.
    pub fn from_json(text: &str) -> Result<Self, DensityError> {
        let file: DensityFile = serde_json::from_str(text)?;
        let weights = file.weights.iter().map(|&w| real::<R>(w)).collect();
        Self::new(file.domain, weights)
    }

    pub fn to_json(&self) -> String {
        let file = DensityFile {
            domain: self.domain.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| w.to_f64().unwrap_or(f64::NAN))
                .collect(),
        };
        serde_json::to_string(&file).expect("density serializes")
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty domains
    }

    pub fn labels(&self) -> &[String] {
        &self.domain
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.domain[idx]
    }

    pub fn weight(&self, idx: usize) -> R {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    /// Sum of all weights.
    pub fn total_mass(&self) -> R {
        self.total
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|l| l == label)
    }

    /// Normalized probabilities, in domain order.
    pub fn normalize(&self) -> Vec<R> {
        self.weights.iter().map(|&w| w / self.total).collect()
    }

    /// Draw an index exactly from the normalized density by inversion:
    /// one uniform, then a cumulative-sum walk.
    pub fn sample_exact(&self, src: &mut UniformSource) -> usize {
        let u: R = src.uniform_unit();
        let target = u * self.total;
        let mut cum = R::zero();
        for (i, &w) in self.weights.iter().enumerate() {
            cum += w;
            if target < cum {
                return i;
            }
        }
        // Rounding pushed the walk past the total; last positive-weight cell.
        self.weights
            .iter()
            .rposition(|&w| w > R::zero())
            .expect("positive total mass")
    }
}

/// A validated pair (target, envelope) with target <= envelope pointwise on
/// a shared domain.
#[derive(Debug, Clone)]
pub struct EnvelopePair<R: Real> {
    target: FiniteDensity<R>,
    envelope: FiniteDensity<R>,
}

impl<R: Real> EnvelopePair<R> {
    pub fn new(
        target: FiniteDensity<R>,
        envelope: FiniteDensity<R>,
    ) -> Result<Self, DensityError> {
        if target.len() != envelope.len() {
            return Err(DensityError::LengthMismatch {
                domain: target.len(),
                weights: envelope.len(),
            });
        }
        for i in 0..target.len() {
            if target.label(i) != envelope.label(i) {
                return Err(DensityError::DomainMismatch(i));
            }
            if target.weight(i) > envelope.weight(i) {
                return Err(DensityError::EnvelopeViolation {
                    label: target.label(i).to_string(),
                    target: target.weight(i).to_f64().unwrap_or(f64::NAN),
                    envelope: envelope.weight(i).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { target, envelope })
    }

    pub fn target(&self) -> &FiniteDensity<R> {
        &self.target
    }

    pub fn envelope(&self) -> &FiniteDensity<R> {
        &self.envelope
    }

    /// Probability that a proposal from the envelope is accepted:
    /// the ratio of the two total masses.
    pub fn acceptance_mass(&self) -> R {
        self.target.total_mass() / self.envelope.total_mass()
    }

    /// Accept ratio at one point; zero where the envelope is zero (such a
    /// point is never proposed).
    pub fn ratio_at(&self, idx: usize) -> R {
        let g = self.envelope.weight(idx);
        if g == R::zero() {
            R::zero()
        } else {
            self.target.weight(idx) / g
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> FiniteDensity<f64> {
        FiniteDensity::new(vec!["a", "b", "c"], vec![1.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            FiniteDensity::<f64>::new(vec!["a"], vec![1.0, 2.0]),
            Err(DensityError::LengthMismatch { .. })
        ));
        assert!(matches!(
            FiniteDensity::<f64>::new(Vec::<&str>::new(), vec![]),
            Err(DensityError::EmptyDomain)
        ));
        assert!(matches!(
            FiniteDensity::new(vec!["a", "a"], vec![1.0, 1.0]),
            Err(DensityError::DuplicateLabel(_))
        ));
        assert!(matches!(
            FiniteDensity::new(vec!["a", "b"], vec![1.0, -1.0]),
            Err(DensityError::BadWeight { .. })
        ));
        assert!(matches!(
            FiniteDensity::new(vec!["a", "b"], vec![0.0, 0.0]),
            Err(DensityError::ZeroMass)
        ));
    }

    #[test]
    fn json_round_trip() {
        let d = tri();
        let text = d.to_json();
        let back: FiniteDensity<f64> = FiniteDensity::from_json(&text).unwrap();
        assert_eq!(d, back);
        assert!(text.contains("\"domain\""));
        assert!(text.contains("\"weights\""));
    }

    #[test]
    fn json_rejects_malformed() {
        assert!(FiniteDensity::<f64>::from_json("{\"domain\": [\"a\"]}").is_err());
        assert!(FiniteDensity::<f64>::from_json("not json").is_err());
    }

    #[test]
    fn normalize_sums_to_one() {
        let p = tri().normalize();
        assert_eq!(p, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn sample_exact_respects_zero_weight() {
        let d =
            FiniteDensity::new(vec!["a", "b", "c"], vec![0.0, 1.0, 0.0]).unwrap();
        let mut src = UniformSource::new(11);
        for _ in 0..500 {
            assert_eq!(d.sample_exact(&mut src), 1);
        }
    }

    #[test]
    fn sample_exact_matches_weights_statistically() {
        let d = tri();
        let mut src = UniformSource::new(2024);
        let mut counts = [0u64; 3];
        for _ in 0..40_000 {
            counts[d.sample_exact(&mut src)] += 1;
        }
        let rep =
            crate::stats::chi_squared_gof(&counts, &d.normalize()).unwrap();
        assert!(rep.passes(1e-3), "p = {}", rep.p_value);
    }

    #[test]
    fn envelope_checks_pointwise_domination() {
        let h = tri();
        let g = FiniteDensity::new(vec!["a", "b", "c"], vec![2.0, 2.0, 2.0]).unwrap();
        let pair = EnvelopePair::new(h.clone(), g).unwrap();
        assert_eq!(pair.acceptance_mass(), 4.0 / 6.0);
        assert_eq!(pair.ratio_at(0), 0.5);
        assert_eq!(pair.ratio_at(1), 1.0);

        let low = FiniteDensity::new(vec!["a", "b", "c"], vec![2.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            EnvelopePair::new(h.clone(), low),
            Err(DensityError::EnvelopeViolation { .. })
        ));
        let other =
            FiniteDensity::new(vec!["a", "b", "x"], vec![3.0, 3.0, 3.0]).unwrap();
        assert!(matches!(
            EnvelopePair::new(h, other),
            Err(DensityError::DomainMismatch(2))
        ));
    }
}
