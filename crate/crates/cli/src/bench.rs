//! `bench` subcommand: measure the linear factory's empirical flip cost
//! over a (C, eps) grid and put it next to the analytic bounds. Wall-clock
//! rates go to stderr so the payload stays byte-reproducible.

use std::time::Instant;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use perfsim::engine::{run, TerminationGuard};
use perfsim::factory::{bf2, FactoryParams, FactorySources};
use perfsim::rng::{CoinStream, UniformSource};
use perfsim::ruin::{
    bound_bf2, bound_bf2_displayed, bound_coefficient, prior_bound, PRIOR_FLIP_COEFFICIENT,
};

use crate::output::{csv_table, to_json};
use crate::tally::tally_costs;
use crate::{ExperimentConfig, Format, Verdict};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scale grid; comma-separated, `--C` alone empties the grid.
    #[arg(long = "C", value_delimiter = ',', num_args = 0.., default_values_t = [1.0, 2.0, 4.0])]
    c: Vec<f64>,

    /// Slack grid; comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [0.1, 0.3])]
    eps: Vec<f64>,
}

#[derive(Serialize)]
struct BenchRow {
    c: f64,
    eps: f64,
    p: f64,
    samples: u64,
    mean_flips: f64,
    flips_stderr: f64,
    bound_bf2: f64,
    bound_displayed: f64,
    prior_bound: f64,
    ratio_vs_prior: f64,
    coefficient_ratio: f64,
    within_bound: bool,
}

#[derive(Serialize)]
struct BenchReport {
    command: &'static str,
    samples: u64,
    seed: u64,
    rows: Vec<BenchRow>,
    all_within_bound: bool,
}

const HEADER: [&str; 12] = [
    "C",
    "eps",
    "p",
    "samples",
    "mean_flips",
    "flips_stderr",
    "bound_bf2",
    "bound_displayed",
    "prior_bound",
    "ratio_vs_prior",
    "coefficient_ratio",
    "within_bound",
];

pub fn cmd_bench(cfg: &ExperimentConfig, args: &BenchArgs) -> Result<Verdict> {
    let coefficient_ratio = bound_coefficient() / PRIOR_FLIP_COEFFICIENT;
    let mut rows = Vec::with_capacity(args.c.len() * args.eps.len());
    let mut all_within = true;
    let mut point = 0u64;
    for &c in &args.c {
        for &eps in &args.eps {
            point += 1;
            let p = (1.0 - eps) / (2.0 * c);
            let params = FactoryParams::new(c, 1, eps)?;
            debug_assert!(params.promise_holds(p));
            let spec = bf2(params);
            let bound = bound_bf2(c, eps)?;
            let displayed = bound_bf2_displayed(c, eps)?;
            let prior = prior_bound(c, eps)?;

            let base = UniformSource::new(cfg.seed).derive_stream(point);
            let started = Instant::now();
            let tally = tally_costs(cfg.samples, |k| {
                let coin = CoinStream::new(p, base.derive_stream(2 * k + 1))
                    .expect("grid bias is in range");
                let mut src = FactorySources::new(base.derive_stream(2 * k), coin);
                run(&spec, spec.initial(), &mut src, TerminationGuard::default())
            })?;
            let secs = started.elapsed().as_secs_f64();
            eprintln!(
                "bench C={c} eps={eps}: {:.3} s for {} bits ({:.3} s per 1e6 bits)",
                secs,
                cfg.samples,
                secs * 1e6 / cfg.samples as f64
            );

            let mean_flips = tally.mean_flips();
            let stderr = tally.flips_stderr();
            let within = mean_flips <= bound + 4.0 * stderr;
            all_within &= within;
            rows.push(BenchRow {
                c,
                eps,
                p,
                samples: cfg.samples,
                mean_flips,
                flips_stderr: stderr,
                bound_bf2: bound,
                bound_displayed: displayed,
                prior_bound: prior,
                ratio_vs_prior: bound / prior,
                coefficient_ratio,
                within_bound: within,
            });
        }
    }
    let payload = match cfg.format {
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.c.to_string(),
                        r.eps.to_string(),
                        r.p.to_string(),
                        r.samples.to_string(),
                        r.mean_flips.to_string(),
                        r.flips_stderr.to_string(),
                        r.bound_bf2.to_string(),
                        r.bound_displayed.to_string(),
                        r.prior_bound.to_string(),
                        r.ratio_vs_prior.to_string(),
                        r.coefficient_ratio.to_string(),
                        r.within_bound.to_string(),
                    ]
                })
                .collect();
            csv_table(&HEADER, &cells)
        }
        Format::Json => to_json(&BenchReport {
            command: "bench",
            samples: cfg.samples,
            seed: cfg.seed,
            rows,
            all_within_bound: all_within,
        })?,
    };
    Ok(Verdict {
        payload,
        all_pass: all_within,
    })
}
