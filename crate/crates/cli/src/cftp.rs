//! `cftp` subcommand: sample a finite chain by coupling from the past and
//! test the histogram against the exactly solved stationary law.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use perfsim::cftp::{
    cftp_run, stationary_exact, three_point_walk, two_state_chain, verify_stationarity,
    KernelChain, Schedule, UpdateSpec,
};
use perfsim::engine::{run, EngineError, TerminationGuard};
use perfsim::rng::UniformSource;
use perfsim::stats::{chi_squared_gof, GofReport};

use crate::output::{require_json, to_json};
use crate::tally::tally_runs;
use crate::{ExperimentConfig, Verdict};

/// Largest stationarity residual an exactly solved chain may show.
const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChainKind {
    /// Three-state weighted walk (weights 1, 2, 3)
    Walk3,
    /// Shipped two-state kernel [[0.9, 0.1], [0.2, 0.8]]
    Twostate,
    /// Kernel JSON from --chain-file
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Double,
    Increment,
    Constant,
}

impl ScheduleArg {
    fn name(self) -> &'static str {
        match self {
            ScheduleArg::Double => "double",
            ScheduleArg::Increment => "increment",
            ScheduleArg::Constant => "constant",
        }
    }
}

impl From<ScheduleArg> for Schedule {
    fn from(arg: ScheduleArg) -> Schedule {
        match arg {
            ScheduleArg::Double => Schedule::Double,
            ScheduleArg::Increment => Schedule::Increment,
            ScheduleArg::Constant => Schedule::Constant,
        }
    }
}

#[derive(Debug, Args)]
pub struct CftpArgs {
    /// Chain to sample.
    #[arg(long, value_enum, default_value_t = ChainKind::Walk3)]
    chain: ChainKind,

    /// Kernel JSON ({"states": [...], "kernel": [[...]]}) for --chain custom.
    #[arg(long, value_name = "FILE")]
    chain_file: Option<PathBuf>,

    /// Starting block width.
    #[arg(long, default_value_t = 1)]
    alpha0: u64,

    /// Block-width growth per level.
    #[arg(long, value_enum, default_value_t = ScheduleArg::Double)]
    schedule: ScheduleArg,

    /// Recursion-depth guard; exceeding it means no coalescence.
    #[arg(long, default_value_t = 64)]
    max_depth: u64,
}

#[derive(Serialize)]
struct CftpReport {
    command: &'static str,
    chain: String,
    schedule: &'static str,
    alpha0: u64,
    max_depth: u64,
    samples: u64,
    seed: u64,
    significance: f64,
    labels: Vec<String>,
    stationary: Vec<f64>,
    residual: f64,
    residual_ok: bool,
    histogram: Vec<u64>,
    gof: GofReport,
    coalescence_levels: Vec<u64>,
    mean_level: f64,
    uniform_draws: u64,
    pass: bool,
}

fn run_chain<U>(
    chain: U,
    chain_name: String,
    cfg: &ExperimentConfig,
    args: &CftpArgs,
) -> Result<Verdict>
where
    U: UpdateSpec + Send + Sync + 'static,
{
    let labels = chain.state_labels();
    let stationary = stationary_exact(&chain)
        .with_context(|| format!("chain '{chain_name}' has no usable stationary law"))?;
    let residual = verify_stationarity(&chain, &stationary);
    let spec = cftp_run(chain, args.schedule.into());
    let guard = TerminationGuard::new(args.max_depth);
    let base = UniformSource::new(cfg.seed);
    let tally = tally_runs(cfg.samples, labels.len(), |k| {
        let mut src = base.derive_stream(k);
        let (state, trace) = run(&spec, args.alpha0, &mut src, guard)?;
        Ok((state, trace))
    })
    .map_err(|err| match err {
        EngineError::DepthExceeded { .. } => anyhow!(
            "{err}: no coalescence within {} levels. A chain without complete couplings \
             (an identity-like kernel, for instance) never coalesces; probe suspect chains \
             with --schedule constant and a small --max-depth",
            args.max_depth
        ),
        other => anyhow!(other),
    })?;
    let gof = chi_squared_gof(&tally.counts, &stationary)?;
    let residual_ok = residual <= RESIDUAL_TOLERANCE;
    let pass = gof.passes(cfg.significance) && residual_ok;
    let report = CftpReport {
        command: "cftp",
        chain: chain_name,
        schedule: args.schedule.name(),
        alpha0: args.alpha0,
        max_depth: args.max_depth,
        samples: cfg.samples,
        seed: cfg.seed,
        significance: cfg.significance,
        labels,
        stationary,
        residual,
        residual_ok,
        histogram: tally.counts.clone(),
        gof,
        coalescence_levels: tally.trimmed_levels(),
        mean_level: tally.mean_level(),
        uniform_draws: tally.uniform_draws,
        pass,
    };
    Ok(Verdict {
        payload: to_json(&report)?,
        all_pass: pass,
    })
}

pub fn cmd_cftp(cfg: &ExperimentConfig, args: &CftpArgs) -> Result<Verdict> {
    require_json(cfg.format, "cftp")?;
    match args.chain {
        ChainKind::Walk3 => run_chain(three_point_walk::<f64>(), "walk3".into(), cfg, args),
        ChainKind::Twostate => run_chain(two_state_chain::<f64>(), "twostate".into(), cfg, args),
        ChainKind::Custom => {
            let Some(path) = &args.chain_file else {
                bail!("--chain custom needs --chain-file FILE");
            };
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let chain = KernelChain::<f64>::from_json(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            run_chain(chain, path.display().to_string(), cfg, args)
        }
    }
}
