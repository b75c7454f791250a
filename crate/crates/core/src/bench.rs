//! Throughput measurement for batched simulation.
//!
//! Each measurement runs one untimed warm-up, then `repeats` timed runs of
//! `steps` lockstep batch steps. Deterministic mode never touches the RNG, so
//! its timings exclude random number generation.

use std::fmt;
use std::time::Instant;

use crate::engine::{run_batch, BatchState, ContinuousState, EngineError};
use crate::geodata::{synthetic_environment, GeoError, SyntheticOptions};
use crate::grid::{Dims, FireState, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMode {
    Stochastic,
    Deterministic,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Stochastic => "stochastic",
            BenchMode::Deterministic => "deterministic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub dims: Dims,
    pub batch: usize,
    pub steps: usize,
    pub repeats: usize,
    pub mode: BenchMode,
    pub seed: u64,
    pub sim: SimConfig,
}

impl BenchConfig {
    pub fn new(dims: Dims, batch: usize, mode: BenchMode) -> Self {
        Self {
            dims,
            batch,
            steps: 50,
            repeats: 3,
            mode,
            seed: 0,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub config: BenchConfig,
    /// Wall time of each timed run in seconds.
    pub run_seconds: Vec<f64>,
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl BenchResult {
    /// Lockstep batch steps per second, mean and std over repeats.
    pub fn steps_per_sec(&self) -> (f64, f64) {
        let rates: Vec<f64> = self
            .run_seconds
            .iter()
            .map(|t| self.config.steps as f64 / t)
            .collect();
        mean_std(&rates)
    }

    /// Cell updates per second summed over the batch, mean and std over repeats.
    pub fn cell_steps_per_sec(&self) -> (f64, f64) {
        let work = (self.config.dims.len() * self.config.batch * self.config.steps) as f64;
        let rates: Vec<f64> = self.run_seconds.iter().map(|t| work / t).collect();
        mean_std(&rates)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark needs batch, steps and repeats of at least 1")]
    Empty,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Times batched runs on a synthetic landscape with a single central ignition.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.batch == 0 || cfg.steps == 0 || cfg.repeats == 0 {
        return Err(BenchError::Empty);
    }
    let opts = SyntheticOptions {
        forest_density: 1.0,
        wind_speed: 2.0,
        ..SyntheticOptions::default()
    };
    let grid = synthetic_environment(cfg.dims, cfg.seed, &opts)?;
    let fire: &FireState = grid.fire();
    let batch = match cfg.mode {
        BenchMode::Stochastic => BatchState::stochastic(vec![fire.clone(); cfg.batch], cfg.seed)?,
        BenchMode::Deterministic => BatchState::deterministic(vec![ContinuousState::from_fire(fire); cfg.batch])?,
    };

    std::hint::black_box(run_batch(&batch, &grid, &cfg.sim, cfg.steps));
    let mut run_seconds = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let start = Instant::now();
        std::hint::black_box(run_batch(&batch, &grid, &cfg.sim, cfg.steps));
        run_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(BenchResult {
        config: *cfg,
        run_seconds,
    })
}
