//! `ar` subcommand: run a rejection sampler and test its output histogram
//! against the exactly known target.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use perfsim::accept_reject::{
    ar_adaptive_envelope, ar_adaptive_param, ar_basic, ar_general, HalvingClamp,
    BASIC_ACCEPT_MAX,
};
use perfsim::engine::{run, EngineError, PrsSpec, TerminationGuard};
use perfsim::rng::UniformSource;
use perfsim::stats::{chi_squared_gof, GofReport};
use perfsim::{Density, Envelope};

use crate::output::{require_json, to_json};
use crate::tally::{tally_runs, SampleTally};
use crate::{ExperimentConfig, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    /// Uniform proposal, fixed acceptance set
    Basic,
    /// Proposal width shrinks toward the target as rejections accumulate
    AdaptiveParam,
    /// Arbitrary target under a dominating envelope (density files)
    General,
    /// Envelope tightened after every rejection (density files)
    AdaptiveEnvelope,
}

impl Variant {
    fn name(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::AdaptiveParam => "adaptive-param",
            Variant::General => "general",
            Variant::AdaptiveEnvelope => "adaptive-envelope",
        }
    }
}

#[derive(Debug, Args)]
pub struct ArArgs {
    /// Which rejection sampler to run.
    #[arg(long, value_enum)]
    variant: Variant,

    /// Starting proposal width for adaptive-param.
    #[arg(long, default_value_t = 5)]
    alpha0: u64,

    /// Target density JSON for the envelope variants.
    #[arg(long, value_name = "FILE")]
    target: Option<std::path::PathBuf>,

    /// Envelope density JSON for the envelope variants.
    #[arg(long, value_name = "FILE")]
    envelope: Option<std::path::PathBuf>,
}

#[derive(Serialize)]
struct ArReport {
    command: &'static str,
    variant: &'static str,
    samples: u64,
    seed: u64,
    significance: f64,
    labels: Vec<String>,
    histogram: Vec<u64>,
    target: Vec<f64>,
    gof: GofReport,
    pass: bool,
    depth_histogram: Vec<u64>,
    mean_depth: f64,
    uniform_draws: u64,
}

fn numeric_labels(n: u64) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn load_density(path: &Path) -> Result<Density> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Density::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_pair(args: &ArArgs) -> Result<Envelope> {
    let (Some(target), Some(envelope)) = (&args.target, &args.envelope) else {
        bail!(
            "--variant {} needs --target FILE and --envelope FILE",
            args.variant.name()
        );
    };
    let target = load_density(target)?;
    let envelope = load_density(envelope)?;
    Ok(Envelope::new(target, envelope)?)
}

/// Draw `samples` outputs of `spec` on derived streams, tallied in parallel.
fn sample<S>(
    spec: &S,
    param: S::Param,
    cells: usize,
    to_cell: impl Fn(&S::Output) -> usize + Sync,
    cfg: &ExperimentConfig,
) -> Result<SampleTally, EngineError>
where
    S: PrsSpec<Src = UniformSource> + Sync,
    S::Param: Clone + Send + Sync,
{
    let base = UniformSource::new(cfg.seed);
    tally_runs(cfg.samples, cells, |k| {
        let mut src = base.derive_stream(k);
        let (out, trace) = run(spec, param.clone(), &mut src, TerminationGuard::default())?;
        Ok((to_cell(&out), trace))
    })
}

pub fn cmd_ar(cfg: &ExperimentConfig, args: &ArArgs) -> Result<Verdict> {
    require_json(cfg.format, "ar")?;
    let uniform_cells = BASIC_ACCEPT_MAX as usize;
    let (labels, target, tally) = match args.variant {
        Variant::Basic => {
            let spec = ar_basic();
            let tally = sample(&spec, (), uniform_cells, |x| (*x - 1) as usize, cfg)?;
            (
                numeric_labels(BASIC_ACCEPT_MAX),
                vec![1.0 / uniform_cells as f64; uniform_cells],
                tally,
            )
        }
        Variant::AdaptiveParam => {
            let spec = ar_adaptive_param(args.alpha0)?;
            let tally = sample(&spec, args.alpha0, uniform_cells, |x| (*x - 1) as usize, cfg)?;
            (
                numeric_labels(BASIC_ACCEPT_MAX),
                vec![1.0 / uniform_cells as f64; uniform_cells],
                tally,
            )
        }
        Variant::General => {
            let pair = load_pair(args)?;
            let labels = pair.target().labels().to_vec();
            let target = pair.target().normalize();
            let cells = labels.len();
            let spec = ar_general(pair);
            let tally = sample(&spec, (), cells, |idx| *idx, cfg)?;
            (labels, target, tally)
        }
        Variant::AdaptiveEnvelope => {
            let pair = load_pair(args)?;
            let labels = pair.target().labels().to_vec();
            let target = pair.target().normalize();
            let cells = labels.len();
            let spec = ar_adaptive_envelope(pair, HalvingClamp);
            let param = spec.initial_pair().clone();
            let tally = sample(&spec, param, cells, |idx| *idx, cfg)?;
            (labels, target, tally)
        }
    };
    let gof = chi_squared_gof(&tally.counts, &target)?;
    let pass = gof.passes(cfg.significance);
    let report = ArReport {
        command: "ar",
        variant: args.variant.name(),
        samples: cfg.samples,
        seed: cfg.seed,
        significance: cfg.significance,
        labels,
        histogram: tally.counts.clone(),
        target,
        gof,
        pass,
        depth_histogram: tally.trimmed_levels(),
        mean_depth: tally.mean_level(),
        uniform_draws: tally.uniform_draws,
    };
    Ok(Verdict {
        payload: to_json(&report)?,
        all_pass: pass,
    })
}
