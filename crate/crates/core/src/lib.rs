//! Cellular-automata wildfire spread simulation.
//!
//! Fire spreads between Moore neighbors with a propagation potential driven
//! by wind, slope and fuel; arriving potential is treated as a Poisson spark
//! rate that ignites the target cell according to its susceptibility. The
//! crate provides:
//!
//! - [`grid`]: state layers and neighbor geometry
//! - [`kernel`]: the per-cell spread formulas, generic over [`autodiff::Scalar`]
//! - [`engine`]: stochastic and deterministic stepping, runs and batches
//! - [`autodiff`]: forward-mode dual numbers
//! - [`calibration`]: loss, Adam and gradient-based parameter fitting
//! - [`geodata`]: ASCII grid rasters, slope, landcover fuel and synthetic terrain
//! - [`rl`]: the air-tanker fire suppression environment and baseline policies
//! - [`bench`]: throughput measurement

pub mod autodiff;
pub mod bench;
pub mod calibration;
pub mod engine;
pub mod geodata;
pub mod grid;
pub mod kernel;
pub mod rl;
pub mod rng;

pub use autodiff::{Dual, Scalar};
pub use engine::{
    fire_fraction_stats, run_batch, run_deterministic, run_stochastic, step_batch, step_deterministic,
    step_stochastic, BatchState, ContinuousState, FireFractions, FractionStats, RunOptions, RunOutput,
    WindSchedule,
};
pub use grid::{
    CellIndex, CellState, Dims, FireState, FuelField, GridState, NeighborOffset, SimConfig, SlopeField,
    SpreadParams, WindField,
};
pub use rng::RngKey;
