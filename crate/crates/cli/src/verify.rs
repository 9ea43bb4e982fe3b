//! `verify-local` subcommand: truncate a sampler's recursion at level `n`,
//! answer the cut with an exact oracle, and verify two things. First, the
//! truncated output still matches the target exactly (GOF). Second, on
//! shared randomness the truncated and full runs agree whenever the full
//! run's depth stays at or below the cutoff, which caps the distance
//! between their outputs by the depth tail.

use anyhow::{ensure, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use perfsim::accept_reject::{ar_adaptive_param, ar_basic, ar_general, BASIC_ACCEPT_MAX};
use perfsim::cftp::{cftp_run, stationary_exact, three_point_walk, Schedule, UpdateSpec};
use perfsim::density::FiniteDensity;
use perfsim::engine::{
    coupled_compare, run_truncated, EngineError, Oracle, PrsSpec, TerminationGuard,
};
use perfsim::rng::UniformSource;
use perfsim::stats::{chi_squared_gof, empirical, tv_distance, GofReport};
use perfsim::{Density, Envelope};

use crate::output::{require_json, to_json};
use crate::tally::{tally_runs, LEVEL_CELLS};
use crate::{ExperimentConfig, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Fixed-acceptance rejection over uniform proposals
    Basic,
    /// Rejection with a shrinking proposal width
    AdaptiveParam,
    /// Envelope rejection on a built-in skewed pair
    General,
    /// Coupling-from-the-past over the three-state walk
    CftpWalk,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Basic => "basic",
            Algo::AdaptiveParam => "adaptive-param",
            Algo::General => "general",
            Algo::CftpWalk => "cftp-walk",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Sampler whose truncated form is checked.
    #[arg(long, value_enum)]
    algorithm: Algo,

    /// Cutoff level; requests from level-n bodies get oracle answers.
    #[arg(long, default_value_t = 0)]
    n: u64,

    /// Starting proposal width for adaptive-param.
    #[arg(long, default_value_t = 5)]
    alpha0: u64,
}

#[derive(Serialize)]
struct CoupledBlock {
    samples: u64,
    deep_runs: u64,
    tail_rate: f64,
    disagreements: u64,
    disagreement_rate: f64,
    shallow_mismatches: u64,
    agreement_below_cutoff: bool,
    tv_gap: f64,
    gap_bound: f64,
    gap_ok: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    algorithm: &'static str,
    n: u64,
    samples: u64,
    seed: u64,
    significance: f64,
    labels: Vec<String>,
    target: Vec<f64>,
    histogram: Vec<u64>,
    gof: GofReport,
    gof_pass: bool,
    coupled: CoupledBlock,
    pass: bool,
}

/// Coupled-pass accumulator; all fields merge by sum.
#[derive(Clone)]
struct CoupledTally {
    full: Vec<u64>,
    trunc: Vec<u64>,
    disagree: u64,
    deep: u64,
    shallow_mismatch: u64,
}

impl CoupledTally {
    fn new(cells: usize) -> Self {
        CoupledTally {
            full: vec![0; cells],
            trunc: vec![0; cells],
            disagree: 0,
            deep: 0,
            shallow_mismatch: 0,
        }
    }

    fn merge(mut self, other: CoupledTally) -> Self {
        for (a, b) in self.full.iter_mut().zip(&other.full) {
            *a += b;
        }
        for (a, b) in self.trunc.iter_mut().zip(&other.trunc) {
            *a += b;
        }
        self.disagree += other.disagree;
        self.deep += other.deep;
        self.shallow_mismatch += other.shallow_mismatch;
        self
    }
}

// One argument per ingredient of the check; bundling them would only add a
// struct the four call sites build inline anyway.
#[allow(clippy::too_many_arguments)]
fn verify_spec<S, F>(
    spec: &S,
    param: S::Param,
    oracle: &F,
    to_cell: impl Fn(&S::Output) -> usize + Sync,
    labels: Vec<String>,
    target: Vec<f64>,
    cfg: &ExperimentConfig,
    args: &VerifyArgs,
) -> Result<Verdict>
where
    S: PrsSpec<Src = UniformSource> + Sync,
    S::Param: Clone + Send + Sync,
    S::Output: PartialEq,
    F: Oracle<S::Param, S::Output, UniformSource> + Sync,
{
    let cells = labels.len();
    let guard = TerminationGuard::default();
    let base = UniformSource::new(cfg.seed);

    // Pass one: the truncated sampler alone, against the exact target.
    let trunc_param = param.clone();
    let tally = tally_runs(cfg.samples, cells, |k| {
        let mut src = base.derive_stream(2 * k);
        let (out, trace) = run_truncated(spec, trunc_param.clone(), args.n, oracle, &mut src, guard)?;
        Ok((to_cell(&out), trace))
    })?;
    let gof = chi_squared_gof(&tally.counts, &target)?;
    let gof_pass = gof.passes(cfg.significance);

    // Pass two: full vs truncated on shared randomness.
    let coupled = (0..cfg.samples)
        .into_par_iter()
        .try_fold(
            || CoupledTally::new(cells),
            |mut acc, k| {
                let cr = coupled_compare(spec, param.clone(), args.n, oracle, guard, || {
                    base.derive_stream(2 * k + 1)
                })?;
                acc.full[to_cell(&cr.x_full)] += 1;
                acc.trunc[to_cell(&cr.y_n)] += 1;
                let agree = cr.x_full == cr.y_n;
                if !agree {
                    acc.disagree += 1;
                }
                if cr.t > args.n {
                    acc.deep += 1;
                } else if !agree {
                    acc.shallow_mismatch += 1;
                }
                Ok::<_, EngineError>(acc)
            },
        )
        .try_reduce(|| CoupledTally::new(cells), |a, b| Ok(a.merge(b)))?;

    let n_runs = cfg.samples as f64;
    let tail_rate = coupled.deep as f64 / n_runs;
    let disagreement_rate = coupled.disagree as f64 / n_runs;
    let tv_gap = tv_distance::<f64>(&empirical(&coupled.full), &empirical(&coupled.trunc));
    let se_tail = (tail_rate * (1.0 - tail_rate) / n_runs).sqrt();
    let se_disagree = (disagreement_rate * (1.0 - disagreement_rate) / n_runs).sqrt();
    let gap_bound = tail_rate + 3.0 * (se_tail + se_disagree);
    let gap_ok = tv_gap <= gap_bound + 1e-12;
    let agreement_below_cutoff = coupled.shallow_mismatch == 0;
    let pass = gof_pass && agreement_below_cutoff && gap_ok;

    let report = VerifyReport {
        command: "verify-local",
        algorithm: args.algorithm.name(),
        n: args.n,
        samples: cfg.samples,
        seed: cfg.seed,
        significance: cfg.significance,
        labels,
        target,
        histogram: tally.counts.clone(),
        gof,
        gof_pass,
        coupled: CoupledBlock {
            samples: cfg.samples,
            deep_runs: coupled.deep,
            tail_rate,
            disagreements: coupled.disagree,
            disagreement_rate,
            shallow_mismatches: coupled.shallow_mismatch,
            agreement_below_cutoff,
            tv_gap,
            gap_bound,
            gap_ok,
        },
        pass,
    };
    Ok(Verdict {
        payload: to_json(&report)?,
        all_pass: pass,
    })
}

fn numeric_labels(n: u64) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Built-in skewed pair for the general variant: target (1, 2, 3) under
/// envelope (2, 2, 4).
fn builtin_pair() -> Envelope {
    let target = FiniteDensity::new(vec!["a", "b", "c"], vec![1.0, 2.0, 3.0]).unwrap();
    let envelope = FiniteDensity::new(vec!["a", "b", "c"], vec![2.0, 2.0, 4.0]).unwrap();
    Envelope::new(target, envelope).unwrap()
}

pub fn cmd_verify_local(cfg: &ExperimentConfig, args: &VerifyArgs) -> Result<Verdict> {
    require_json(cfg.format, "verify-local")?;
    ensure!(
        (args.n as usize) < LEVEL_CELLS - 1,
        "cutoff n must be below {}",
        LEVEL_CELLS - 1
    );
    let uniform = vec![1.0 / BASIC_ACCEPT_MAX as f64; BASIC_ACCEPT_MAX as usize];
    match args.algorithm {
        Algo::Basic => {
            let spec = ar_basic();
            let oracle =
                |_: &(), src: &mut UniformSource| Ok(src.uniform_int(BASIC_ACCEPT_MAX) + 1);
            verify_spec(
                &spec,
                (),
                &oracle,
                |x: &u64| (*x - 1) as usize,
                numeric_labels(BASIC_ACCEPT_MAX),
                uniform,
                cfg,
                args,
            )
        }
        Algo::AdaptiveParam => {
            let spec = ar_adaptive_param(args.alpha0)?;
            // The recursion re-targets the same law at every parameter.
            let oracle =
                |_: &u64, src: &mut UniformSource| Ok(src.uniform_int(BASIC_ACCEPT_MAX) + 1);
            verify_spec(
                &spec,
                args.alpha0,
                &oracle,
                |x: &u64| (*x - 1) as usize,
                numeric_labels(BASIC_ACCEPT_MAX),
                uniform,
                cfg,
                args,
            )
        }
        Algo::General => {
            let pair = builtin_pair();
            let labels = pair.target().labels().to_vec();
            let target = pair.target().normalize();
            let oracle_density = pair.target().clone();
            let spec = ar_general(pair);
            let oracle =
                move |_: &(), src: &mut UniformSource| Ok(oracle_density.sample_exact(src));
            verify_spec(&spec, (), &oracle, |i: &usize| *i, labels, target, cfg, args)
        }
        Algo::CftpWalk => {
            let walk = three_point_walk::<f64>();
            let labels = walk.state_labels();
            let pi = stationary_exact(&walk)?;
            let oracle_density = Density::new(labels.clone(), pi.clone())?;
            let spec = cftp_run(walk, Schedule::Double);
            let oracle =
                move |_: &u64, src: &mut UniformSource| Ok(oracle_density.sample_exact(src));
            verify_spec(&spec, 1u64, &oracle, |i: &usize| *i, labels, pi, cfg, args)
        }
    }
}
