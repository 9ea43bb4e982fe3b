//! `ruin` subcommand: expected absorption time of the biased walk by
//! closed form, linear solve, and (optionally) simulation.

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use perfsim::rng::UniformSource;
use perfsim::Walk;

use crate::output::{require_json, to_json};
use crate::{ExperimentConfig, Verdict};

/// Agreement tolerance between the closed form and the linear solve.
const SOLVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Args)]
pub struct RuinArgs {
    /// Up-move probability in (0, 1].
    #[arg(long)]
    r: f64,

    /// Right absorbing barrier.
    #[arg(long)]
    n: u64,

    /// Starting state in {0..n}.
    #[arg(long, default_value_t = 1)]
    start: u64,

    /// Cross-check the solved value with --samples simulated walks.
    #[arg(long, default_value_t = false)]
    mc_check: bool,
}

#[derive(Serialize)]
struct McCheck {
    samples: u64,
    mean: f64,
    stderr: f64,
    z: f64,
    ok: bool,
}

#[derive(Serialize)]
struct RuinReport {
    command: &'static str,
    r: f64,
    n: u64,
    start: u64,
    seed: u64,
    solved: f64,
    closed: Option<f64>,
    abs_gap: Option<f64>,
    closed_matches_solved: Option<bool>,
    drift_bound: Option<f64>,
    within_drift_bound: Option<bool>,
    mc: Option<McCheck>,
    pass: bool,
}

pub fn cmd_ruin(cfg: &ExperimentConfig, args: &RuinArgs) -> Result<Verdict> {
    require_json(cfg.format, "ruin")?;
    let chain = Walk::new(args.r, args.n, args.start)?;
    let solved = chain.expected_steps_solved();
    // Closed form and drift bound exist only under upward drift.
    let closed = chain.expected_steps_exact().ok();
    let drift_bound = chain.drift_bound().ok();
    let abs_gap = closed.map(|c| (c - solved).abs());
    let closed_matches_solved = abs_gap.map(|g| g <= SOLVE_TOLERANCE);
    let within_drift_bound = drift_bound.map(|b| solved <= b + SOLVE_TOLERANCE);

    let mc = if args.mc_check {
        let base = UniformSource::new(cfg.seed);
        let (sum, sqsum) = (0..cfg.samples)
            .into_par_iter()
            .fold(
                || (0u64, 0u64),
                |mut acc, k| {
                    let mut src = base.derive_stream(k);
                    let steps = chain.sample_steps(&mut src);
                    acc.0 += steps;
                    acc.1 += steps * steps;
                    acc
                },
            )
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let n = cfg.samples as f64;
        let mean = sum as f64 / n;
        let var = ((sqsum as f64) - (sum as f64) * (sum as f64) / n) / (n - 1.0);
        let stderr = (var.max(0.0) / n).sqrt();
        let z = if stderr > 0.0 {
            (mean - solved) / stderr
        } else {
            0.0
        };
        Some(McCheck {
            samples: cfg.samples,
            mean,
            stderr,
            z,
            ok: z.abs() <= 4.0 && (stderr > 0.0 || mean == solved),
        })
    } else {
        None
    };

    let pass = closed_matches_solved.unwrap_or(true)
        && within_drift_bound.unwrap_or(true)
        && mc.as_ref().is_none_or(|m| m.ok);
    let report = RuinReport {
        command: "ruin",
        r: args.r,
        n: args.n,
        start: args.start,
        seed: cfg.seed,
        solved,
        closed,
        abs_gap,
        closed_matches_solved,
        drift_bound,
        within_drift_bound,
        mc,
        pass,
    };
    Ok(Verdict {
        payload: to_json(&report)?,
        all_pass: pass,
    })
}
