//! Coupling from the past over finite state spaces.
//!
//! An update spec supplies one primitive stationary update: apply(state,
//! noise) plus the law of the noise. The sampler composes blocks of
//! primitives, detects complete coupling by brute force over the state set,
//! and recurses further into the past until a block couples; the recursion's
//! own structure guarantees deeper randomness is applied first.
//!
//! Noise laws are enumerated exactly: each spec partitions its primitive
//! noise space into finitely many cells on which every state's image is
//! constant. That gives the one-step transition kernel without quadrature
//! error, so stationary distributions solve to machine precision.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, PrsSpec, Step};
use crate::num::{real, Real};
use crate::rng::UniformSource;

#[derive(Debug, Error)]
pub enum CftpError {
    #[error("block width must be positive")]
    ZeroWidth,
    #[error("kernel is reducible: no unique stationary distribution")]
    Reducible,
    #[error("bad chain: {0}")]
    BadChain(String),
    #[error("stationary solve failed: {0}")]
    Numeric(String),
    #[error("invalid chain JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One primitive stationary update on a finite state space.
///
/// States are indices `0..n_states()`; labels are for reporting only.
/// `noise_cells` must partition the primitive noise law into cells with a
/// representative and an exact probability mass, such that `apply(x, r)` is
/// constant in `r` over each cell for every state `x`. Everything exact
/// (kernels, coupling probabilities) is derived from that partition.
pub trait UpdateSpec {
    type Noise: Clone + Debug + 'static;

    fn n_states(&self) -> usize;
    fn state_labels(&self) -> Vec<String>;
    fn apply(&self, state: usize, noise: &Self::Noise) -> usize;
    fn draw_noise(&self, src: &mut UniformSource) -> Self::Noise;
    fn noise_cells(&self) -> Vec<(Self::Noise, f64)>;
}

/// Apply a block of primitive updates in order (index 0 first).
pub fn apply_block<U: UpdateSpec + ?Sized>(u: &U, state: usize, block: &[U::Noise]) -> usize {
    block.iter().fold(state, |x, r| u.apply(x, r))
}

/// Whether one block of randomness sends every state to the same image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingCertificate {
    pub coalesced: bool,
    /// The common image; present exactly when `coalesced`.
    pub image: Option<usize>,
}

/// Brute-force coupling check: push every state through the block and see
/// whether a single image remains. This realizes the maximal coupling set.
pub fn detect_coupling<U: UpdateSpec + ?Sized>(u: &U, block: &[U::Noise]) -> CouplingCertificate {
    let mut images = (0..u.n_states()).map(|x| apply_block(u, x, block));
    let first = images.next().expect("update spec has at least one state");
    if images.all(|y| y == first) {
        CouplingCertificate {
            coalesced: true,
            image: Some(first),
        }
    } else {
        CouplingCertificate {
            coalesced: false,
            image: None,
        }
    }
}

/// Exact probability that a block of `len` fresh primitives coalesces,
/// found by enumerating every product of noise cells. Cost is
/// |cells|^len; meant for small oracle computations, not sampling.
pub fn coalescence_probability<U: UpdateSpec>(u: &U, len: u32) -> f64 {
    let cells = u.noise_cells();
    let mut total = 0.0;
    let mut idx = vec![0usize; len as usize];
    loop {
        let block: Vec<U::Noise> = idx.iter().map(|&i| cells[i].0.clone()).collect();
        if detect_coupling(u, &block).coalesced {
            total += idx.iter().map(|&i| cells[i].1).product::<f64>();
        }
        // Odometer over cell indices.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < cells.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// How the block width grows from one recursion level to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Double the width each level; standard practice.
    #[default]
    Double,
    /// Grow by one each level.
    Increment,
    /// Keep the width fixed.
    Constant,
}

impl Schedule {
    pub fn next(&self, alpha: u64) -> u64 {
        match self {
            Schedule::Double => alpha.saturating_mul(2),
            Schedule::Increment => alpha.saturating_add(1),
            Schedule::Constant => alpha,
        }
    }
}

/// The recursive sampler. Each level draws a fresh block of `alpha`
/// primitives; if the block couples, its image is the answer, otherwise the
/// level asks the past (recursion) for a stationary state and pushes it
/// through its own block. Level 0's block is therefore applied last.
pub struct CftpSampler<U> {
    update: Arc<U>,
    schedule: Schedule,
}

pub fn cftp_run<U: UpdateSpec>(update: U, schedule: Schedule) -> CftpSampler<U> {
    CftpSampler {
        update: Arc::new(update),
        schedule,
    }
}

impl<U> CftpSampler<U> {
    pub fn update(&self) -> &U {
        &self.update
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }
}

impl<U: UpdateSpec + 'static> PrsSpec for CftpSampler<U> {
    type Param = u64;
    type Output = usize;
    type Src = UniformSource;

    fn body(&self, alpha: &u64, src: &mut UniformSource) -> Step<u64, usize, UniformSource> {
        if *alpha == 0 {
            return Step::Fail(EngineError::spec(CftpError::ZeroWidth));
        }
        let block: Vec<U::Noise> = (0..*alpha).map(|_| self.update.draw_noise(src)).collect();
        let cert = detect_coupling(&*self.update, &block);
        match cert.image {
            Some(image) => Step::Done(image),
            None => {
                let update = Arc::clone(&self.update);
                Step::recurse_with(self.schedule.next(*alpha), move |y, _src| {
                    Step::Done(apply_block(&*update, y, &block))
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exact kernel and stationary distribution
// ---------------------------------------------------------------------------

/// Transition matrix of one primitive update, built from the exact noise
/// cells: K[x][y] = P(apply(x, R) = y).
pub fn one_step_kernel<U: UpdateSpec + ?Sized>(u: &U) -> Vec<Vec<f64>> {
    let n = u.n_states();
    let cells = u.noise_cells();
    debug_assert!(
        (cells.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-9,
        "noise cells must partition the law"
    );
    let mut kernel = vec![vec![0.0; n]; n];
    for (noise, mass) in &cells {
        for x in 0..n {
            kernel[x][u.apply(x, noise)] += mass;
        }
    }
    kernel
}

fn strongly_connected(kernel: &[Vec<f64>]) -> bool {
    let n = kernel.len();
    let reach = |edges: &dyn Fn(usize, usize) -> bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for (y, was_seen) in seen.iter_mut().enumerate() {
                if !*was_seen && edges(x, y) {
                    *was_seen = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(&|x, y| kernel[x][y] > 0.0) && reach(&|x, y| kernel[y][x] > 0.0)
}

/// Solve a dense linear system by Gaussian elimination with partial
/// pivoting. Sized for the desk-scale chains this crate ships.
// The elimination reads row `col` while writing row `row`; index loops beat
// the split-borrow contortions an iterator form would need.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, CftpError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[pivot][col].abs() < 1e-300 {
            return Err(CftpError::Numeric("singular system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Unique stationary distribution of the primitive update's kernel.
///
/// Requires the kernel to be irreducible; solves the balance equations with
/// the normalization constraint and re-checks the residual.
pub fn stationary_exact<U: UpdateSpec + ?Sized>(u: &U) -> Result<Vec<f64>, CftpError> {
    let kernel = one_step_kernel(u);
    let n = kernel.len();
    if n == 0 {
        return Err(CftpError::BadChain("no states".into()));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    if !strongly_connected(&kernel) {
        return Err(CftpError::Reducible);
    }
    // Rows 0..n-1: balance equations K^T pi - pi = 0 (last one is redundant
    // and replaced by normalization).
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..n - 1 {
        for i in 0..n {
            a[j][i] = kernel[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = solve_dense(a, b)?;
    let residual = stationarity_residual(&kernel, &pi);
    let bad = |p: f64| p.is_nan() || p < -1e-12;
    if residual > 1e-10 || pi.iter().any(|&p| bad(p)) {
        return Err(CftpError::Numeric(format!(
            "solution failed verification (residual {residual:.3e})"
        )));
    }
    Ok(pi.into_iter().map(|p| p.max(0.0)).collect())
}

fn stationarity_residual(kernel: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = kernel.len();
    (0..n)
        .map(|j| {
            let pushed: f64 = (0..n).map(|i| pi[i] * kernel[i][j]).sum();
            (pushed - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Max-norm residual of the balance equations for a candidate distribution:
/// the distance between pi pushed through one update and pi itself.
pub fn verify_stationarity<U: UpdateSpec + ?Sized>(u: &U, pi: &[f64]) -> f64 {
    let kernel = one_step_kernel(u);
    assert_eq!(kernel.len(), pi.len(), "distribution length must match state count");
    stationarity_residual(&kernel, pi)
}

// ---------------------------------------------------------------------------
// Shipped chains
// ---------------------------------------------------------------------------

/// Noise for a nearest-neighbor Metropolis move: a proposal direction and
/// the acceptance uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkNoise<R> {
    pub up: bool,
    pub u: R,
}

/// Metropolis walk on `{0..m-1}` targeting weights `w`: propose a uniform
/// neighbor, accept with probability min(1, w_to/w_from), treat off-range
/// proposals as rejected.
#[derive(Debug, Clone)]
pub struct MetropolisWalk<R: Real> {
    weights: Vec<R>,
}

impl<R: Real> MetropolisWalk<R> {
    pub fn new(weights: Vec<R>) -> Result<Self, CftpError> {
        if weights.len() < 2 {
            return Err(CftpError::BadChain("need at least two states".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > R::zero())) {
            return Err(CftpError::BadChain("weights must be positive".into()));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    /// The target distribution, by construction.
    pub fn target(&self) -> Vec<R> {
        let total = self
            .weights
            .iter()
            .fold(R::zero(), |acc, &w| acc + w);
        self.weights.iter().map(|&w| w / total).collect()
    }

    fn ratio(&self, from: usize, to: usize) -> R {
        self.weights[to] / self.weights[from]
    }
}

impl<R: Real> UpdateSpec for MetropolisWalk<R> {
    type Noise = WalkNoise<R>;

    fn n_states(&self) -> usize {
        self.weights.len()
    }

    fn state_labels(&self) -> Vec<String> {
        (0..self.weights.len()).map(|i| i.to_string()).collect()
    }

    fn apply(&self, state: usize, noise: &WalkNoise<R>) -> usize {
        let to = if noise.up {
            state + 1
        } else if state == 0 {
            return 0;
        } else {
            state - 1
        };
        if to >= self.weights.len() {
            return state;
        }
        let ratio = self.ratio(state, to);
        if ratio >= R::one() || noise.u < ratio {
            to
        } else {
            state
        }
    }

    fn draw_noise(&self, src: &mut UniformSource) -> WalkNoise<R> {
        WalkNoise {
            up: src.bern_known(real::<R>(0.5)),
            u: src.uniform_unit(),
        }
    }

    fn noise_cells(&self) -> Vec<(WalkNoise<R>, f64)> {
        // Every acceptance test in apply() compares u against some ratio
        // w_to/w_from < 1; those ratios cut [0,1) into intervals on which
        // all images are constant.
        let mut bounds: Vec<R> = Vec::new();
        for from in 0..self.weights.len() {
            for to in [from.wrapping_sub(1), from + 1] {
                if to < self.weights.len() && from != to {
                    let ratio = self.ratio(from, to);
                    if ratio < R::one() && !bounds.contains(&ratio) {
                        bounds.push(ratio);
                    }
                }
            }
        }
        bounds.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
        let mut cells = Vec::new();
        let two = real::<R>(2.0);
        for up in [false, true] {
            let mut lo = R::zero();
            for &hi in bounds.iter().chain(std::iter::once(&R::one())) {
                let mass = 0.5 * (hi.to_f64().unwrap() - lo.to_f64().unwrap());
                let rep = lo + (hi - lo) / two;
                cells.push((WalkNoise { up, u: rep }, mass));
                lo = hi;
            }
        }
        cells
    }
}

#[derive(Deserialize, Serialize)]
struct ChainFile {
    states: Vec<String>,
    kernel: Vec<Vec<f64>>,
}

/// Chain given directly by a row-stochastic transition matrix. The update
/// is the quantile coupling: one shared uniform inverts every row's CDF, so
/// states whose rows overlap enough coalesce.
#[derive(Debug, Clone)]
pub struct KernelChain<R: Real> {
    labels: Vec<String>,
    cums: Vec<Vec<R>>,
}

impl<R: Real> KernelChain<R> {
    pub fn new<S: Into<String>>(labels: Vec<S>, rows: Vec<Vec<f64>>) -> Result<Self, CftpError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        if n == 0 {
            return Err(CftpError::BadChain("no states".into()));
        }
        if rows.len() != n {
            return Err(CftpError::BadChain(format!(
                "kernel has {} rows for {} states",
                rows.len(),
                n
            )));
        }
        let mut cums = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CftpError::BadChain(format!("row {i} has {} entries", row.len())));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(CftpError::BadChain(format!("row {i} has entries outside [0,1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CftpError::BadChain(format!("row {i} sums to {total}")));
            }
            let mut cum = Vec::with_capacity(n);
            let mut acc = R::zero();
            for &p in row {
                acc += real::<R>(p);
                cum.push(acc);
            }
            cums.push(cum);
        }
        Ok(Self { labels, cums })
    }

    /// Parse the on-disk form: `{"states": [labels], "kernel": [[rows]]}`.
    pub fn from_json(text: &str) -> Result<Self, CftpError> {
        let file: ChainFile = serde_json::from_str(text)?;
        Self::new(file.states, file.kernel)
    }
}

impl<R: Real> UpdateSpec for KernelChain<R> {
    type Noise = R;

    fn n_states(&self) -> usize {
        self.labels.len()
    }

    fn state_labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn apply(&self, state: usize, noise: &R) -> usize {
        let cum = &self.cums[state];
        for (j, &edge) in cum.iter().enumerate() {
            if *noise < edge {
                return j;
            }
        }
        // u landed at or above the final cumulative value (rounding);
        // last state with positive mass.
        let mut prev = R::zero();
        for j in (0..cum.len()).rev() {
            prev = if j == 0 { R::zero() } else { cum[j - 1] };
            if cum[j] > prev {
                return j;
            }
        }
        let _ = prev;
        0
    }

    fn draw_noise(&self, src: &mut UniformSource) -> R {
        src.uniform_unit()
    }

    fn noise_cells(&self) -> Vec<(R, f64)> {
        let mut bounds: Vec<R> = Vec::new();
        for cum in &self.cums {
            for &edge in cum {
                if edge > R::zero() && edge < R::one() && !bounds.contains(&edge) {
                    bounds.push(edge);
                }
            }
        }
        bounds.sort_by(|a, b| a.partial_cmp(b).expect("finite bounds"));
        let two = real::<R>(2.0);
        let mut cells = Vec::new();
        let mut lo = R::zero();
        for &hi in bounds.iter().chain(std::iter::once(&R::one())) {
            let mass = hi.to_f64().unwrap() - lo.to_f64().unwrap();
            if mass > 0.0 {
                cells.push((lo + (hi - lo) / two, mass));
            }
            lo = hi;
        }
        cells
    }
}

/// The walk on three points with weights (1, 2, 3).
pub fn three_point_walk<R: Real>() -> MetropolisWalk<R> {
    MetropolisWalk::new(vec![real(1.0), real(2.0), real(3.0)]).expect("valid weights")
}

/// The two-state chain with kernel [[0.9, 0.1], [0.2, 0.8]].
pub fn two_state_chain<R: Real>() -> KernelChain<R> {
    KernelChain::new(vec!["0", "1"], vec![vec![0.9, 0.1], vec![0.2, 0.8]])
        .expect("valid kernel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, TerminationGuard};

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn walk_kernel_rows_are_stochastic() {
        let walk = three_point_walk::<f64>();
        for row in one_step_kernel(&walk) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn walk_stationary_matches_weights() {
        let walk = three_point_walk::<f64>();
        let pi = stationary_exact(&walk).unwrap();
        let want = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        assert!(max_abs_diff(&pi, &want) <= 1e-12, "pi = {pi:?}");
        assert!(verify_stationarity(&walk, &want) <= 1e-10);
    }

    #[test]
    fn symmetric_walk_is_uniform() {
        let walk = MetropolisWalk::new(vec![2.0f64, 2.0, 2.0]).unwrap();
        let pi = stationary_exact(&walk).unwrap();
        let third = 1.0 / 3.0;
        assert!(max_abs_diff(&pi, &[third, third, third]) <= 1e-12);
    }

    #[test]
    fn two_state_solution_is_two_thirds() {
        let chain = two_state_chain::<f64>();
        let pi = stationary_exact(&chain).unwrap();
        assert!(max_abs_diff(&pi, &[2.0 / 3.0, 1.0 / 3.0]) <= 1e-10);
    }

    #[test]
    fn broken_update_fails_stationarity() {
        // Acceptance ratios computed from inverted weights: a valid chain,
        // but stationary for the wrong distribution.
        let broken = MetropolisWalk::new(vec![3.0f64, 2.0, 1.0]).unwrap();
        let target = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        let residual = verify_stationarity(&broken, &target);
        assert!(residual > 1e-3, "broken chain looked stationary: {residual}");
        // Its own target still verifies, as any Metropolis chain must.
        assert!(verify_stationarity(&broken, &[3.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0]) <= 1e-10);
    }

    #[test]
    fn identity_kernel_is_reducible_and_never_couples() {
        let chain: KernelChain<f64> =
            KernelChain::new(vec!["a", "b"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(stationary_exact(&chain), Err(CftpError::Reducible)));
        let cells = chain.noise_cells();
        assert_eq!(cells.len(), 1);
        let noise = cells[0].0;
        assert_eq!(chain.apply(0, &noise), 0);
        assert_eq!(chain.apply(1, &noise), 1);
        assert!(!detect_coupling(&chain, &[noise]).coalesced);
        assert_eq!(coalescence_probability(&chain, 3), 0.0);
    }

    #[test]
    fn constant_chain_always_couples() {
        let chain: KernelChain<f64> =
            KernelChain::new(vec!["a", "b"], vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let noise = chain.noise_cells()[0].0;
        let cert = detect_coupling(&chain, &[noise]);
        assert!(cert.coalesced);
        assert_eq!(cert.image, Some(0));
        assert_eq!(coalescence_probability(&chain, 1), 1.0);
    }

    #[test]
    fn walk3_coupling_probability_structure() {
        let walk = three_point_walk::<f64>();
        // No single Metropolis move can merge all three states.
        assert_eq!(coalescence_probability(&walk, 1), 0.0);
        let p2 = coalescence_probability(&walk, 2);
        let p3 = coalescence_probability(&walk, 3);
        // Two up-moves send everything to the top: probability >= 1/4.
        assert!(p2 >= 0.25, "p2 = {p2}");
        assert!(p3 >= p2, "coupling probability must grow with block length");
        assert!(p3 <= 1.0);
    }

    #[test]
    fn never_coupling_chain_hits_depth_guard() {
        let chain: KernelChain<f64> =
            KernelChain::new(vec!["a", "b"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sampler = cftp_run(chain, Schedule::Constant);
        let mut src = UniformSource::new(4);
        let err = run(&sampler, 1, &mut src, TerminationGuard::new(50)).unwrap_err();
        assert!(matches!(err, EngineError::DepthExceeded { .. }));
    }

    #[test]
    fn zero_width_blocks_are_rejected() {
        let sampler = cftp_run(two_state_chain::<f64>(), Schedule::Double);
        let mut src = UniformSource::new(4);
        let err = run(&sampler, 0, &mut src, TerminationGuard::default()).unwrap_err();
        match err {
            EngineError::Spec(e) => {
                assert!(matches!(
                    e.downcast_ref::<CftpError>(),
                    Some(CftpError::ZeroWidth)
                ));
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn sampler_is_replayable() {
        let sampler = cftp_run(three_point_walk::<f64>(), Schedule::Double);
        for seed in [10u64, 20, 30] {
            let mut a = UniformSource::new(seed);
            let mut b = UniformSource::new(seed);
            let ra = run(&sampler, 1, &mut a, TerminationGuard::default()).unwrap();
            let rb = run(&sampler, 1, &mut b, TerminationGuard::default()).unwrap();
            assert_eq!(ra.0, rb.0);
            assert_eq!(ra.1, rb.1);
        }
    }

    #[test]
    fn chain_json_round_trip_and_validation() {
        let text = r#"{"states": ["x", "y"], "kernel": [[0.9, 0.1], [0.2, 0.8]]}"#;
        let chain: KernelChain<f64> = KernelChain::from_json(text).unwrap();
        assert_eq!(chain.state_labels(), vec!["x", "y"]);
        let pi = stationary_exact(&chain).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-10);

        assert!(KernelChain::<f64>::from_json("{}").is_err());
        let bad_sum = r#"{"states": ["x", "y"], "kernel": [[0.9, 0.3], [0.2, 0.8]]}"#;
        assert!(matches!(
            KernelChain::<f64>::from_json(bad_sum),
            Err(CftpError::BadChain(_))
        ));
        let not_square = r#"{"states": ["x", "y"], "kernel": [[1.0], [0.2, 0.8]]}"#;
        assert!(KernelChain::<f64>::from_json(not_square).is_err());
    }

    #[test]
    fn quantile_coupling_of_two_state_chain() {
        // Cells: [0, 0.2), [0.2, 0.9), [0.9, 1). First and last coalesce.
        let chain = two_state_chain::<f64>();
        let cells = chain.noise_cells();
        assert_eq!(cells.len(), 3);
        let p1 = coalescence_probability(&chain, 1);
        assert!((p1 - 0.3).abs() < 1e-12, "p1 = {p1}");
    }

    #[test]
    fn stationary_exact_on_random_dense_kernel() {
        let chain: KernelChain<f64> = KernelChain::new(
            vec!["a", "b", "c", "d"],
            vec![
                vec![0.1, 0.4, 0.3, 0.2],
                vec![0.25, 0.25, 0.25, 0.25],
                vec![0.0, 0.5, 0.5, 0.0],
                vec![0.6, 0.0, 0.1, 0.3],
            ],
        )
        .unwrap();
        let pi = stationary_exact(&chain).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&p| p >= 0.0));
        assert!(verify_stationarity(&chain, &pi) <= 1e-12);
    }
}
