//! `bounds` subcommand: tabulate the flip-cost bound, its prior-art
//! counterpart, and their ratios over a (C, eps) grid. Pure arithmetic,
//! no sampling.

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use perfsim::ruin::{
    bound_bf2, bound_bf2_displayed, bound_coefficient, prior_bound, PRIOR_FLIP_COEFFICIENT,
};

use crate::output::{csv_table, to_json};
use crate::{ExperimentConfig, Format, Verdict};

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Scale grid; comma-separated, `--C` alone empties the grid.
    #[arg(long = "C", value_delimiter = ',', num_args = 0.., default_values_t = [1.0, 2.0, 4.0])]
    c: Vec<f64>,

    /// Slack grid (eps in (0, 1]); comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [0.1, 0.01, 0.001, 0.0001])]
    eps: Vec<f64>,
}

#[derive(Serialize)]
struct BoundsRow {
    c: f64,
    eps: f64,
    bound_bf2: f64,
    bound_displayed: f64,
    prior_bound: f64,
    ratio_vs_prior: f64,
    coefficient_ratio: f64,
}

#[derive(Serialize)]
struct BoundsReport {
    command: &'static str,
    coefficient: f64,
    coefficient_ratio: f64,
    rows: Vec<BoundsRow>,
}

const HEADER: [&str; 7] = [
    "C",
    "eps",
    "bound_bf2",
    "bound_displayed",
    "prior_bound",
    "ratio_vs_prior",
    "coefficient_ratio",
];

pub fn cmd_bounds(cfg: &ExperimentConfig, args: &BoundsArgs) -> Result<Verdict> {
    let coefficient = bound_coefficient();
    let coefficient_ratio = coefficient / PRIOR_FLIP_COEFFICIENT;
    let mut rows = Vec::with_capacity(args.c.len() * args.eps.len());
    for &c in &args.c {
        for &eps in &args.eps {
            let bound = bound_bf2(c, eps)?;
            let displayed = bound_bf2_displayed(c, eps)?;
            let prior = prior_bound(c, eps)?;
            rows.push(BoundsRow {
                c,
                eps,
                bound_bf2: bound,
                bound_displayed: displayed,
                prior_bound: prior,
                ratio_vs_prior: bound / prior,
                coefficient_ratio,
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
                        r.bound_bf2.to_string(),
                        r.bound_displayed.to_string(),
                        r.prior_bound.to_string(),
                        r.ratio_vs_prior.to_string(),
                        r.coefficient_ratio.to_string(),
                    ]
                })
                .collect();
            csv_table(&HEADER, &cells)
        }
        Format::Json => to_json(&BoundsReport {
            command: "bounds",
            coefficient,
            coefficient_ratio,
            rows,
        })?,
    };
    // A bound table has nothing statistical to fail.
    Ok(Verdict {
        payload,
        all_pass: true,
    })
}
