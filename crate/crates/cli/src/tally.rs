//! Parallel integer-only accumulators. Merging is a commutative sum, so
//! fan-out over rayon workers is schedule-invariant and the derived floats
//! are bit-identical across runs and thread counts.

use perfsim::engine::{EngineError, RunTrace};
use rayon::prelude::*;

/// Depth histogram cells; the last cell collects everything deeper.
pub const LEVEL_CELLS: usize = 33;

/// Tally for samplers with categorical output.
#[derive(Debug, Clone)]
pub struct SampleTally {
    pub counts: Vec<u64>,
    pub levels: Vec<u64>,
    pub level_sum: u64,
    pub uniform_draws: u64,
    pub coin_flips: u64,
}

impl SampleTally {
    pub fn new(cells: usize) -> Self {
        SampleTally {
            counts: vec![0; cells],
            levels: vec![0; LEVEL_CELLS],
            level_sum: 0,
            uniform_draws: 0,
            coin_flips: 0,
        }
    }

    pub fn absorb(&mut self, cell: usize, trace: RunTrace) {
        self.counts[cell] += 1;
        let slot = (trace.max_level as usize).min(LEVEL_CELLS - 1);
        self.levels[slot] += 1;
        self.level_sum += trace.max_level;
        self.uniform_draws += trace.uniform_draws;
        self.coin_flips += trace.coin_flips;
    }

    pub fn merge(mut self, other: SampleTally) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            *a += b;
        }
        self.level_sum += other.level_sum;
        self.uniform_draws += other.uniform_draws;
        self.coin_flips += other.coin_flips;
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean_level(&self) -> f64 {
        self.level_sum as f64 / self.total() as f64
    }

    /// Depth histogram trimmed after the deepest populated cell.
    pub fn trimmed_levels(&self) -> Vec<u64> {
        let last = self.levels.iter().rposition(|&c| c > 0).unwrap_or(0);
        self.levels[..=last].to_vec()
    }
}

/// Run `run_one` for every replicate index, tallying across workers.
pub fn tally_runs(
    samples: u64,
    cells: usize,
    run_one: impl Fn(u64) -> Result<(usize, RunTrace), EngineError> + Sync,
) -> Result<SampleTally, EngineError> {
    (0..samples)
        .into_par_iter()
        .try_fold(
            || SampleTally::new(cells),
            |mut acc, k| {
                let (cell, trace) = run_one(k)?;
                acc.absorb(cell, trace);
                Ok(acc)
            },
        )
        .try_reduce(|| SampleTally::new(cells), |a, b| Ok(a.merge(b)))
}

/// Tally for bit-valued runs with cost accounting.
#[derive(Debug, Clone, Default)]
pub struct CostTally {
    pub runs: u64,
    pub ones: u64,
    pub flips_sum: u64,
    pub flips_sqsum: u64,
    pub uniform_draws: u64,
    pub max_level: u64,
}

impl CostTally {
    pub fn absorb(&mut self, bit: u8, trace: RunTrace) {
        self.runs += 1;
        self.ones += bit as u64;
        self.flips_sum += trace.coin_flips;
        self.flips_sqsum += trace.coin_flips * trace.coin_flips;
        self.uniform_draws += trace.uniform_draws;
        self.max_level = self.max_level.max(trace.max_level);
    }

    pub fn merge(mut self, other: CostTally) -> Self {
        self.runs += other.runs;
        self.ones += other.ones;
        self.flips_sum += other.flips_sum;
        self.flips_sqsum += other.flips_sqsum;
        self.uniform_draws += other.uniform_draws;
        self.max_level = self.max_level.max(other.max_level);
        self
    }

    pub fn mean(&self) -> f64 {
        self.ones as f64 / self.runs as f64
    }

    pub fn mean_flips(&self) -> f64 {
        self.flips_sum as f64 / self.runs as f64
    }

    pub fn flips_stderr(&self) -> f64 {
        if self.runs < 2 {
            return 0.0;
        }
        let n = self.runs as f64;
        let sum = self.flips_sum as f64;
        let var = (self.flips_sqsum as f64 - sum * sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

/// Run a bit-valued experiment for every replicate index.
pub fn tally_costs(
    samples: u64,
    run_one: impl Fn(u64) -> Result<(u8, RunTrace), EngineError> + Sync,
) -> Result<CostTally, EngineError> {
    (0..samples)
        .into_par_iter()
        .try_fold(CostTally::default, |mut acc, k| {
            let (bit, trace) = run_one(k)?;
            acc.absorb(bit, trace);
            Ok(acc)
        })
        .try_reduce(CostTally::default, |a, b| Ok(a.merge(b)))
}
