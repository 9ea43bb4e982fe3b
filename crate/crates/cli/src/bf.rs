//! `bf` subcommand: run the power factory with a harness-chosen coin bias
//! and compare the output mean and flip cost to their exact values.
//!
//! The bias `p` exists only here: it seeds the coin stream, and the
//! factory sees nothing but flips.

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use perfsim::engine::{run, TerminationGuard};
use perfsim::factory::{bf2, FactoryParams, FactorySources};
use perfsim::rng::{CoinStream, UniformSource};
use perfsim::ruin::{bound_bf2, prior_bound};
use perfsim::stats::{binomial_mean_test, MeanTest};

use crate::output::{require_json, to_json};
use crate::tally::tally_costs;
use crate::{ExperimentConfig, Verdict};

#[derive(Debug, Args)]
pub struct BfArgs {
    /// Scale C of the target Bern((Cp)^i); at least 1.
    #[arg(long = "C")]
    c: f64,

    /// Exponent i; 0 answers 1 immediately.
    #[arg(long, default_value_t = 1)]
    i: u64,

    /// Slack eps in (0,1) behind the promise C*p <= 1 - eps.
    #[arg(long)]
    eps: f64,

    /// Harness-side coin bias; the factory only ever sees flips.
    #[arg(long)]
    p: f64,
}

#[derive(Serialize)]
struct BfReport {
    command: &'static str,
    c: f64,
    i: u64,
    eps: f64,
    p: f64,
    samples: u64,
    seed: u64,
    expected_mean: f64,
    mean: f64,
    mean_test: Option<MeanTest>,
    mean_checked_exactly: bool,
    mean_ok: bool,
    mean_flips: f64,
    flips_stderr: f64,
    max_depth_seen: u64,
    uniform_draws: u64,
    bound_bf2: f64,
    prior_bound: f64,
    ratio_vs_prior: f64,
    flips_within_bound: Option<bool>,
    pass: bool,
}

pub fn cmd_bf(cfg: &ExperimentConfig, args: &BfArgs) -> Result<Verdict> {
    require_json(cfg.format, "bf")?;
    let params = FactoryParams::new(args.c, args.i, args.eps)?;
    if !(args.p.is_finite() && (0.0..=1.0).contains(&args.p)) {
        bail!("p must lie in [0, 1], got {}", args.p);
    }
    if !params.promise_holds(args.p) {
        bail!(
            "promise violated: C*p = {} exceeds 1 - eps = {}; the factory's guarantee \
             needs C*p <= 1 - eps",
            args.c * args.p,
            1.0 - args.eps
        );
    }
    let spec = bf2(params);
    let base = UniformSource::new(cfg.seed);
    let tally = tally_costs(cfg.samples, |k| {
        let coin = CoinStream::new(args.p, base.derive_stream(2 * k + 1))
            .expect("bias already validated");
        let mut src = FactorySources::new(base.derive_stream(2 * k), coin);
        run(&spec, spec.initial(), &mut src, TerminationGuard::default())
    })?;

    let expected = params.target_mean(args.p);
    // Degenerate targets are checked exactly; interior ones by z-test.
    let (mean_test, mean_checked_exactly, mean_ok) = if expected <= 0.0 {
        (None, true, tally.ones == 0)
    } else if expected >= 1.0 {
        // Only i = 0 reaches probability one, and it must cost nothing.
        (None, true, tally.ones == tally.runs && tally.flips_sum == 0)
    } else {
        let test = binomial_mean_test(tally.ones, tally.runs, expected)?;
        let ok = test.within(4.0);
        (Some(test), false, ok)
    };

    let bound = bound_bf2(args.c, args.eps)?;
    let prior = prior_bound(args.c, args.eps)?;
    // The flip-cost bound is stated for the exponent-one factory.
    let flips_within_bound = (args.i == 1)
        .then(|| tally.mean_flips() <= bound + 4.0 * tally.flips_stderr());
    let pass = mean_ok && flips_within_bound.unwrap_or(true);

    let report = BfReport {
        command: "bf",
        c: args.c,
        i: args.i,
        eps: args.eps,
        p: args.p,
        samples: cfg.samples,
        seed: cfg.seed,
        expected_mean: expected,
        mean: tally.mean(),
        mean_test,
        mean_checked_exactly,
        mean_ok,
        mean_flips: tally.mean_flips(),
        flips_stderr: tally.flips_stderr(),
        max_depth_seen: tally.max_level,
        uniform_draws: tally.uniform_draws,
        bound_bf2: bound,
        prior_bound: prior,
        ratio_vs_prior: bound / prior,
        flips_within_bound,
        pass,
    };
    Ok(Verdict {
        payload: to_json(&report)?,
        all_pass: pass,
    })
}
