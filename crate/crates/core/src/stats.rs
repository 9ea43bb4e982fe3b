//! Verification statistics: goodness-of-fit, mean tests, and the total
//! variation metric.
//!
//! The p-value machinery (regularized incomplete gamma) lives here rather
//! than behind a stats dependency because the samplers it checks are the
//! point of the crate; the checker has to be auditable on its own, and the
//! closed-form identities in the tests pin it down to 1e-8.

use serde::Serialize;
use thiserror::Error;

use crate::num::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least two cells after merging, have {0}")]
    TooFewCells(usize),
    #[error("counts and probabilities differ in length: {counts} vs {probs}")]
    LengthMismatch { counts: usize, probs: usize },
    #[error("cell probabilities must be positive and sum to one (sum = {0})")]
    BadDistribution(f64),
    #[error("no samples")]
    Empty,
    #[error("expected mean must lie in (0, 1), got {0}")]
    BadMean(f64),
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma
// ---------------------------------------------------------------------------

/// Lanczos g = 7, n = 9 coefficients, digits as published.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function, for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-14;
const GAMMA_MAX_ITER: usize = 400;

/// Lower regularized gamma P(a, x) by power series; good for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper regularized gamma Q(a, x) by modified Lentz continued fraction;
/// good for x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper regularized incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
///
/// Requires a > 0 and x >= 0. Accurate to better than 1e-8 over the ranges
/// the chi-squared tests touch; the unit tests pin it against closed forms.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain: a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Survival function of the chi-squared distribution with `dof` degrees of
/// freedom: P(X > x).
pub fn chi_squared_sf(x: f64, dof: u64) -> f64 {
    assert!(dof >= 1, "chi-squared needs at least one degree of freedom");
    regularized_gamma_q(dof as f64 / 2.0, x.max(0.0) / 2.0)
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

/// Expected count below which a cell is pooled with its neighbor before the
/// chi-squared statistic is formed.
pub const MIN_EXPECTED_PER_CELL: f64 = 5.0;

/// Outcome of a Pearson goodness-of-fit test.
#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    /// Pearson statistic after cell pooling.
    pub statistic: f64,
    /// Degrees of freedom (pooled cells minus one).
    pub dof: u64,
    /// Upper tail probability of the statistic.
    pub p_value: f64,
    /// Total samples observed.
    pub samples: u64,
    /// Cells actually compared after pooling.
    pub cells_used: usize,
    /// Raw cells that were pooled into a neighbor.
    pub cells_merged: usize,
}

impl GofReport {
    /// True when the sample is consistent with the reference distribution at
    /// the given significance level.
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson chi-squared test of observed counts against cell probabilities.
///
/// Adjacent cells are pooled left to right until every pooled cell has
/// expected count at least [`MIN_EXPECTED_PER_CELL`]; a trailing short group
/// is folded into its predecessor. Pooling keeps the statistic calibrated at
/// the sample sizes the experiments use.
pub fn chi_squared_gof<R: Real>(counts: &[u64], probs: &[R]) -> Result<GofReport, StatsError> {
    if counts.len() != probs.len() {
        return Err(StatsError::LengthMismatch {
            counts: counts.len(),
            probs: probs.len(),
        });
    }
    if counts.is_empty() {
        return Err(StatsError::TooFewCells(0));
    }
    let probs: Vec<f64> = probs
        .iter()
        .map(|p| p.to_f64().unwrap_or(f64::NAN))
        .collect();
    let total_prob: f64 = probs.iter().sum();
    let bad = |p: f64| p.is_nan() || p <= 0.0;
    if probs.iter().any(|&p| bad(p)) || (total_prob - 1.0).abs() > 1e-6 {
        return Err(StatsError::BadDistribution(total_prob));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let nf = n as f64;

    // Pool adjacent cells until each group carries enough expectation.
    let mut groups: Vec<(f64, f64)> = Vec::with_capacity(counts.len()); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (&c, &p) in counts.iter().zip(&probs) {
        acc_obs += c as f64;
        acc_exp += nf * p;
        if acc_exp >= MIN_EXPECTED_PER_CELL {
            groups.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += acc_obs;
                last.1 += acc_exp;
            }
            None => return Err(StatsError::TooFewCells(1)),
        }
    }
    if groups.len() < 2 {
        return Err(StatsError::TooFewCells(groups.len()));
    }

    let statistic: f64 = groups
        .iter()
        .map(|&(obs, exp)| (obs - exp).powi(2) / exp)
        .sum();
    let dof = (groups.len() - 1) as u64;
    Ok(GofReport {
        statistic,
        dof,
        p_value: chi_squared_sf(statistic, dof),
        samples: n,
        cells_used: groups.len(),
        cells_merged: counts.len() - groups.len(),
    })
}

// ---------------------------------------------------------------------------
// Mean test
// ---------------------------------------------------------------------------

/// Outcome of a binomial mean test.
#[derive(Debug, Clone, Serialize)]
pub struct MeanTest {
    pub observed_mean: f64,
    pub expected_mean: f64,
    /// Standard error of the mean under the null.
    pub stderr: f64,
    /// Normal score of the observation.
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub trials: u64,
}

impl MeanTest {
    /// True when the observed mean sits within `sigmas` standard errors.
    pub fn within(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// Two-sided z-test of a Bernoulli success count against a known mean.
pub fn binomial_mean_test<R: Real>(
    successes: u64,
    trials: u64,
    expected: R,
) -> Result<MeanTest, StatsError> {
    if trials == 0 {
        return Err(StatsError::Empty);
    }
    let p0 = expected.to_f64().unwrap_or(f64::NAN);
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::BadMean(p0));
    }
    let n = trials as f64;
    let observed = successes as f64 / n;
    let stderr = (p0 * (1.0 - p0) / n).sqrt();
    let z = (observed - p0) / stderr;
    // Two-sided normal tail via erfc(|z|/sqrt 2) = Q(1/2, z^2/2).
    let p_value = if z == 0.0 {
        1.0
    } else {
        regularized_gamma_q(0.5, z * z / 2.0)
    };
    Ok(MeanTest {
        observed_mean: observed,
        expected_mean: p0,
        stderr,
        z,
        p_value,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

/// Total variation distance between two finite distributions on the same
/// ordered support: half the L1 distance.
///
/// Panics if the slices differ in length; aligning supports is the caller's
/// job.
pub fn tv_distance<R: Real>(p: &[R], q: &[R]) -> R {
    assert_eq!(p.len(), q.len(), "tv_distance needs aligned supports");
    let two = real::<R>(2.0);
    p.iter()
        .zip(q)
        .fold(R::zero(), |acc, (&a, &b)| acc + (a - b).abs())
        / two
}

/// Empirical distribution from counts, in the same order.
pub fn empirical<R: Real>(counts: &[u64]) -> Vec<R> {
    let n: u64 = counts.iter().sum();
    let nf = real::<R>(n as f64);
    counts
        .iter()
        .map(|&c| real::<R>(c as f64) / nf)
        .collect()
}
