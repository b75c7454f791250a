//! Time stepping: stochastic Bernoulli updates of discrete fire layers,
//! deterministic propagation of per-cell state probabilities, and lockstep
//! batches of independent simulations.
//!
//! All updates are synchronous: every cell transitions based on the layer at
//! time `t`. Stochastic draws come from [`RngKey`] keyed by cell index, so
//! results do not depend on how the work is split across threads.
//!
//! The deterministic mode weights each neighbor by its burning probability.
//! This is a mean-field approximation: over several steps it is not the exact
//! expectation of the stochastic process because cell correlations are
//! dropped. For a single step from a 0/1 state the two modes agree exactly.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::Scalar;
use crate::grid::{CellState, Dims, FireState, GridError, GridState, SimConfig, SpreadParams, WindField};
use crate::kernel::{ignition_probability, intensity_by, SpreadTable};
use crate::rng::RngKey;

/// Grids at least this large are split across threads within a step.
const PAR_CELL_THRESHOLD: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("probability triple at cell {index} is invalid: ({p_un}, {p_burn}, {p_bd})")]
    InvalidProbabilities {
        index: usize,
        p_un: f64,
        p_burn: f64,
        p_bd: f64,
    },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch member {index} has dims {got:?}, expected {expected:?}")]
    BatchDims {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
}

/// Per-cell probabilities of being unburned, burning and burned out.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousState<T = f64> {
    dims: Dims,
    p_un: Vec<T>,
    p_burn: Vec<T>,
    p_bd: Vec<T>,
}

/// Absolute tolerance for the per-cell sum of a probability triple.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

impl<T: Scalar> ContinuousState<T> {
    /// Validates nonnegativity and that each triple sums to 1 within
    /// [`SIMPLEX_TOLERANCE`].
    pub fn new(dims: Dims, p_un: Vec<T>, p_burn: Vec<T>, p_bd: Vec<T>) -> Result<Self, EngineError> {
        for (layer, len) in [("p_un", p_un.len()), ("p_burn", p_burn.len()), ("p_bd", p_bd.len())] {
            if len != dims.len() {
                return Err(GridError::DimensionMismatch {
                    layer,
                    expected: dims.as_tuple(),
                    got: (len, 1),
                }
                .into());
            }
        }
        for i in 0..dims.len() {
            let (a, b, c) = (p_un[i].value(), p_burn[i].value(), p_bd[i].value());
            let ok = [a, b, c].iter().all(|x| x.is_finite() && *x >= 0.0)
                && (a + b + c - 1.0).abs() <= SIMPLEX_TOLERANCE;
            if !ok {
                return Err(EngineError::InvalidProbabilities {
                    index: i,
                    p_un: a,
                    p_burn: b,
                    p_bd: c,
                });
            }
        }
        Ok(Self {
            dims,
            p_un,
            p_burn,
            p_bd,
        })
    }

    /// The 0/1 state matching a discrete fire layer.
    pub fn from_fire(fire: &FireState) -> Self {
        let indicator = |s: CellState| -> Vec<T> {
            fire.cells()
                .iter()
                .map(|&c| if c == s { T::one() } else { T::zero() })
                .collect()
        };
        Self {
            dims: fire.dims(),
            p_un: indicator(CellState::Unburned),
            p_burn: indicator(CellState::Burning),
            p_bd: indicator(CellState::Burned),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn p_un(&self) -> &[T] {
        &self.p_un
    }

    pub fn p_burn(&self) -> &[T] {
        &self.p_burn
    }

    pub fn p_bd(&self) -> &[T] {
        &self.p_bd
    }

    /// Drops derivative information.
    pub fn values(&self) -> ContinuousState<f64> {
        let v = |x: &[T]| x.iter().map(|t| t.value()).collect();
        ContinuousState {
            dims: self.dims,
            p_un: v(&self.p_un),
            p_burn: v(&self.p_burn),
            p_bd: v(&self.p_bd),
        }
    }

    /// Converts scalar type cell by cell.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> ContinuousState<U> {
        let m = |x: &[T]| x.iter().map(|&t| f(t)).collect();
        ContinuousState {
            dims: self.dims,
            p_un: m(&self.p_un),
            p_burn: m(&self.p_burn),
            p_bd: m(&self.p_bd),
        }
    }

    /// The most probable discrete state per cell (ties favor burned, then burning).
    pub fn most_likely_fire(&self) -> FireState {
        let cells = (0..self.dims.len())
            .map(|i| {
                let (u, b, d) = (self.p_un[i].value(), self.p_burn[i].value(), self.p_bd[i].value());
                if d >= b && d >= u {
                    CellState::Burned
                } else if b >= u {
                    CellState::Burning
                } else {
                    CellState::Unburned
                }
            })
            .collect();
        FireState::from_cells(self.dims, cells).expect("dims are consistent")
    }
}

/// Fractions of the grid in each fire state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireFractions {
    pub unburned: f64,
    pub burning: f64,
    pub burned: f64,
}

/// States that can report [`FireFractions`].
pub trait FractionStats {
    fn fire_fraction_stats(&self) -> FireFractions;
}

impl FractionStats for FireState {
    fn fire_fraction_stats(&self) -> FireFractions {
        let n = self.dims().len() as f64;
        FireFractions {
            unburned: self.count(CellState::Unburned) as f64 / n,
            burning: self.count(CellState::Burning) as f64 / n,
            burned: self.count(CellState::Burned) as f64 / n,
        }
    }
}

impl<T: Scalar> FractionStats for ContinuousState<T> {
    fn fire_fraction_stats(&self) -> FireFractions {
        let n = self.dims.len() as f64;
        let mean = |x: &[T]| x.iter().map(|t| t.value()).sum::<f64>() / n;
        FireFractions {
            unburned: mean(&self.p_un),
            burning: mean(&self.p_burn),
            burned: mean(&self.p_bd),
        }
    }
}

pub fn fire_fraction_stats(state: &impl FractionStats) -> FireFractions {
    state.fire_fraction_stats()
}

/// One stochastic step. Cell `i` uses the single draw `key.uniform(i)`:
/// an unburned cell ignites when it falls below its ignition probability, a
/// burning cell keeps burning when it falls below `p_continue`.
pub fn step_stochastic(fire: &FireState, grid: &GridState, cfg: &SimConfig, key: RngKey) -> FireState {
    let dims = fire.dims();
    debug_assert_eq!(dims, grid.dims());
    let params = cfg.params();
    let sampler = key.sampler();
    let cells = fire.cells();
    let burning_weight = |i: usize| {
        if cells[i] == CellState::Burning {
            1.0
        } else {
            0.0
        }
    };
    let next_cell = |i: usize| -> CellState {
        match cells[i] {
            CellState::Burned => CellState::Burned,
            CellState::Burning => {
                if sampler.uniform(i as u64) < params.p_continue {
                    CellState::Burning
                } else {
                    CellState::Burned
                }
            }
            CellState::Unburned => {
                let v = dims.cell(i);
                let lambda = intensity_by(v, grid, &params, burning_weight);
                if lambda == 0.0 {
                    return CellState::Unburned;
                }
                let p = ignition_probability(v, lambda, grid, &params);
                if sampler.uniform(i as u64) < p {
                    CellState::Burning
                } else {
                    CellState::Unburned
                }
            }
        }
    };
    let next: Vec<CellState> = if dims.len() >= PAR_CELL_THRESHOLD {
        (0..dims.len())
            .into_par_iter()
            .with_min_len(dims.width.max(64))
            .map(next_cell)
            .collect()
    } else {
        (0..dims.len()).map(next_cell).collect()
    };
    FireState::from_cells(dims, next).expect("dims are consistent")
}

/// One deterministic step on the probability triples.
///
/// `newly = p_un·p_ignite`, `continuing = p_burn·p_continue`,
/// `burned_now = p_burn·(1 − p_continue)`; then
/// `p_burn' = newly + continuing`, `p_un' = p_un − newly`, `p_bd' = p_bd + burned_now`.
pub fn step_deterministic<T: Scalar>(
    state: &ContinuousState<T>,
    grid: &GridState,
    params: &SpreadParams<T>,
) -> ContinuousState<T> {
    debug_assert_eq!(state.dims, grid.dims());
    advance_deterministic(state, &SpreadTable::new(grid, params), params.p_continue)
}

fn advance_deterministic<T: Scalar>(
    state: &ContinuousState<T>,
    table: &SpreadTable<T>,
    p_continue: T,
) -> ContinuousState<T> {
    let dims = state.dims;
    let p_burn = &state.p_burn;
    let cell = |i: usize| -> (T, T, T) {
        let un = state.p_un[i];
        let burn = p_burn[i];
        let newly = if un.value() == 0.0 {
            T::zero()
        } else {
            let lambda = table.intensity(dims.cell(i), |u| p_burn[u]);
            un * table.ignition_probability(i, lambda)
        };
        let continuing = burn * p_continue;
        let burned_now = burn * (T::one() - p_continue);
        (un - newly, newly + continuing, state.p_bd[i] + burned_now)
    };
    let triples: Vec<(T, T, T)> = if dims.len() >= PAR_CELL_THRESHOLD {
        (0..dims.len())
            .into_par_iter()
            .with_min_len(dims.width.max(64))
            .map(cell)
            .collect()
    } else {
        (0..dims.len()).map(cell).collect()
    };
    let mut next = ContinuousState {
        dims,
        p_un: Vec::with_capacity(dims.len()),
        p_burn: Vec::with_capacity(dims.len()),
        p_bd: Vec::with_capacity(dims.len()),
    };
    for (u, b, d) in triples {
        next.p_un.push(u);
        next.p_burn.push(b);
        next.p_bd.push(d);
    }
    next
}

/// Step-indexed wind fields. Step `t` uses entry `t`; the last entry holds
/// past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSchedule {
    fields: Vec<Arc<WindField>>,
}

impl WindSchedule {
    pub fn new(fields: Vec<WindField>) -> Result<Self, EngineError> {
        if let Some(first) = fields.first() {
            for (i, f) in fields.iter().enumerate() {
                if f.dims() != first.dims() {
                    return Err(EngineError::BatchDims {
                        index: i,
                        expected: first.dims().as_tuple(),
                        got: f.dims().as_tuple(),
                    });
                }
            }
        }
        Ok(Self {
            fields: fields.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn at(&self, step: usize) -> Option<&Arc<WindField>> {
        self.fields.get(step.min(self.fields.len().saturating_sub(1)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub steps: usize,
    /// Keep every intermediate state. Otherwise only the final state is held.
    pub record: bool,
    pub wind: Option<&'a WindSchedule>,
}

impl RunOptions<'_> {
    pub fn steps(steps: usize) -> Self {
        Self {
            steps,
            record: false,
            wind: None,
        }
    }

    pub fn recorded(steps: usize) -> Self {
        Self {
            steps,
            record: true,
            wind: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<S> {
    pub final_state: S,
    /// `steps + 1` states including the initial one when recording, else empty.
    pub trajectory: Vec<S>,
}

fn grid_for_step(grid: &GridState, wind: Option<&WindSchedule>, t: usize) -> Result<GridState, EngineError> {
    match wind.and_then(|w| w.at(t)) {
        Some(field) => Ok(grid.with_shared_wind(Arc::clone(field))?),
        None => Ok(grid.clone()),
    }
}

fn drive<S: Clone>(
    initial: &S,
    grid: &GridState,
    opts: &RunOptions<'_>,
    mut step: impl FnMut(&S, &GridState, usize) -> S,
) -> Result<RunOutput<S>, EngineError> {
    let mut trajectory = Vec::new();
    if opts.record {
        trajectory.reserve(opts.steps + 1);
        trajectory.push(initial.clone());
    }
    let mut current = initial.clone();
    for t in 0..opts.steps {
        let g = grid_for_step(grid, opts.wind, t)?;
        current = step(&current, &g, t);
        if opts.record {
            trajectory.push(current.clone());
        }
    }
    Ok(RunOutput {
        final_state: current,
        trajectory,
    })
}

/// Runs `opts.steps` stochastic steps; step `t` draws from `key.advance(t)`.
pub fn run_stochastic(
    initial: &FireState,
    grid: &GridState,
    cfg: &SimConfig,
    key: RngKey,
    opts: &RunOptions<'_>,
) -> Result<RunOutput<FireState>, EngineError> {
    check_dims(initial.dims(), grid)?;
    drive(initial, grid, opts, |s, g, t| step_stochastic(s, g, cfg, key.advance(t as u64)))
}

/// Runs `opts.steps` deterministic steps.
pub fn run_deterministic<T: Scalar>(
    initial: &ContinuousState<T>,
    grid: &GridState,
    params: &SpreadParams<T>,
    opts: &RunOptions<'_>,
) -> Result<RunOutput<ContinuousState<T>>, EngineError> {
    check_dims(initial.dims(), grid)?;
    if opts.wind.is_some() {
        return drive(initial, grid, opts, |s, g, _| step_deterministic(s, g, params));
    }
    let table = SpreadTable::new(grid, params);
    drive(initial, grid, opts, |s, _, _| advance_deterministic(s, &table, params.p_continue))
}

fn check_dims(dims: Dims, grid: &GridState) -> Result<(), EngineError> {
    if dims != grid.dims() {
        return Err(GridError::DimensionMismatch {
            layer: "state",
            expected: grid.dims().as_tuple(),
            got: dims.as_tuple(),
        }
        .into());
    }
    Ok(())
}

/// A homogeneous batch of independent simulations sharing one grid and config.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchState {
    /// Each member carries its own key; member keys advance one step per step.
    Stochastic { fires: Vec<FireState>, keys: Vec<RngKey> },
    Deterministic { states: Vec<ContinuousState<f64>> },
}

impl BatchState {
    /// Member `k` gets stream `k` of `seed`, starting at step 0.
    pub fn stochastic(fires: Vec<FireState>, seed: u64) -> Result<Self, EngineError> {
        let keys = (0..fires.len() as u64)
            .map(|k| RngKey::new(seed).with_stream(k))
            .collect();
        Self::stochastic_with_keys(fires, keys)
    }

    pub fn stochastic_with_keys(fires: Vec<FireState>, keys: Vec<RngKey>) -> Result<Self, EngineError> {
        if fires.is_empty() {
            return Err(EngineError::EmptyBatch);
        }
        assert_eq!(fires.len(), keys.len(), "one key per batch member");
        check_members(fires.iter().map(|f| f.dims()))?;
        Ok(Self::Stochastic { fires, keys })
    }

    pub fn deterministic(states: Vec<ContinuousState<f64>>) -> Result<Self, EngineError> {
        if states.is_empty() {
            return Err(EngineError::EmptyBatch);
        }
        check_members(states.iter().map(|s| s.dims()))?;
        Ok(Self::Deterministic { states })
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Stochastic { fires, .. } => fires.len(),
            Self::Deterministic { states } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Dims {
        match self {
            Self::Stochastic { fires, .. } => fires[0].dims(),
            Self::Deterministic { states } => states[0].dims(),
        }
    }
}

fn check_members(mut dims: impl Iterator<Item = Dims>) -> Result<(), EngineError> {
    let first = dims.next().expect("nonempty");
    for (i, d) in dims.enumerate() {
        if d != first {
            return Err(EngineError::BatchDims {
                index: i + 1,
                expected: first.as_tuple(),
                got: d.as_tuple(),
            });
        }
    }
    Ok(())
}

/// Steps every member once, in parallel across members.
pub fn step_batch(batch: &BatchState, grid: &GridState, cfg: &SimConfig) -> BatchState {
    match batch {
        BatchState::Deterministic { .. } => step_batch_with(batch, grid, cfg, &SpreadTable::new(grid, &cfg.params())),
        BatchState::Stochastic { .. } => step_batch_with(batch, grid, cfg, &SpreadTable::empty()),
    }
}

fn step_batch_with(batch: &BatchState, grid: &GridState, cfg: &SimConfig, table: &SpreadTable<f64>) -> BatchState {
    match batch {
        BatchState::Stochastic { fires, keys } => {
            let fires = fires
                .par_iter()
                .zip(keys.par_iter())
                .map(|(f, k)| step_stochastic(f, grid, cfg, *k))
                .collect();
            let keys = keys.iter().map(|k| k.advance(1)).collect();
            BatchState::Stochastic { fires, keys }
        }
        BatchState::Deterministic { states } => {
            let states = states
                .par_iter()
                .map(|s| advance_deterministic(s, table, cfg.p_continue))
                .collect();
            BatchState::Deterministic { states }
        }
    }
}

/// Steps a batch `steps` times.
pub fn run_batch(batch: &BatchState, grid: &GridState, cfg: &SimConfig, steps: usize) -> BatchState {
    let table = match batch {
        BatchState::Deterministic { .. } => SpreadTable::new(grid, &cfg.params()),
        BatchState::Stochastic { .. } => SpreadTable::empty(),
    };
    let mut current = batch.clone();
    for _ in 0..steps {
        current = step_batch_with(&current, grid, cfg, &table);
    }
    current
}
