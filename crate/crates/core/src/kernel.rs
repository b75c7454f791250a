//! Per-cell spread math: wind and slope factors, propagation potential,
//! arrival intensity and ignition probability.
//!
//! Everything here is generic over [`Scalar`] so the same formulas serve the
//! stochastic simulator (`f64`) and gradient computation (`Dual`).

use crate::autodiff::Scalar;
use crate::grid::{CellIndex, GridState, NeighborOffset, SpreadParams};

/// Cosine of the angle between the propagation direction and the wind.
#[inline]
fn alignment(direction: f64, k: usize) -> f64 {
    (OFFSET_ANGLES[k] - direction).cos()
}

const OFFSET_ANGLES: [f64; 8] = {
    let mut a = [0.0; 8];
    let mut k = 0;
    while k < 8 {
        a[k] = k as f64 * std::f64::consts::FRAC_PI_4;
        k += 1;
    }
    a
};

/// Wind factor `exp(α_w1·V) · exp(α_w2·V·(cos(φ(Δ) − Θ) − 1))`.
pub fn kappa_wind<T: Scalar>(
    speed: f64,
    direction: f64,
    d: NeighborOffset,
    params: &SpreadParams<T>,
) -> T {
    let head = params.alpha_w1.scale(speed).exp();
    let cross = params
        .alpha_w2
        .scale(speed * (alignment(direction, d.ordinal()) - 1.0))
        .exp();
    head * cross
}

/// Slope factor `exp(α_s·s)`; above 1 uphill, below 1 downhill.
pub fn kappa_slope<T: Scalar>(s: f64, params: &SpreadParams<T>) -> T {
    params.alpha_s.scale(s).exp()
}

/// Propagation potential from burning source `u` toward its neighbor in
/// direction `d`. Uses the source cell's fuel, wind and slope. Always ≥ 0.
/// `u + d` is not required to be in bounds.
#[inline]
pub fn potential<T: Scalar>(
    u: CellIndex,
    d: NeighborOffset,
    grid: &GridState,
    params: &SpreadParams<T>,
) -> T {
    potential_at(grid.dims().index(u), d.ordinal(), grid, params)
}

#[inline]
fn potential_at<T: Scalar>(
    idx: usize,
    k: usize,
    grid: &GridState,
    params: &SpreadParams<T>,
) -> T {
    let fuel = grid.fuel();
    let fuel_factor = (1.0 + fuel.veg()[idx]) * (1.0 + fuel.den()[idx]);
    if fuel_factor == 0.0 {
        return T::zero();
    }
    let wind = grid.wind();
    let speed = wind.speed()[idx];
    let slope = grid.slope().at(idx)[k];
    // κ_wind·κ_slope folded into a single exponential
    let exponent = params.alpha_w1.scale(speed)
        + params
            .alpha_w2
            .scale(speed * (alignment(wind.direction()[idx], k) - 1.0))
        + params.alpha_s.scale(slope);
    params.p_base.scale(fuel_factor) * exponent.exp()
}

/// Expected number of sparks arriving at `v`: the sum over in-bounds
/// neighbors `u` of `burning_weight[u] · φ(u, Δ_{u→v})`.
///
/// `burning_weight` is a per-cell map in `[0, 1]` (0/1 in stochastic mode,
/// the burning probability in deterministic mode). Out-of-bounds neighbors
/// contribute nothing.
pub fn arrival_intensity<T: Scalar>(
    v: CellIndex,
    burning_weight: &[T],
    grid: &GridState,
    params: &SpreadParams<T>,
) -> T {
    intensity_by(v, grid, params, |i| burning_weight[i])
}

/// Arrival intensity with the weight looked up by flat index. Neighbors whose
/// weight has value 0 are skipped.
#[inline]
pub(crate) fn intensity_by<T: Scalar>(
    v: CellIndex,
    grid: &GridState,
    params: &SpreadParams<T>,
    weight: impl Fn(usize) -> T,
) -> T {
    let dims = grid.dims();
    let mut lambda = T::zero();
    for (k, d) in NeighborOffset::ALL.iter().enumerate() {
        // the source sits at v - d and spreads in direction d
        if let Some(u) = dims.neighbor(v, d.opposite()) {
            let ui = dims.index(u);
            let w = weight(ui);
            if w.value() == 0.0 {
                continue;
            }
            lambda += w * potential_at(ui, k, grid, params);
        }
    }
    lambda
}

/// Susceptibility `γ(v) = α_γ·(1 + μ_veg(v))·(1 + μ_den(v))` of the target cell.
#[inline]
pub fn susceptibility<T: Scalar>(v: CellIndex, grid: &GridState, params: &SpreadParams<T>) -> T {
    let idx = grid.dims().index(v);
    let fuel = grid.fuel();
    params
        .alpha_gamma
        .scale((1.0 + fuel.veg()[idx]) * (1.0 + fuel.den()[idx]))
}

/// `1 − exp(−γ(v)·λ)`: probability that at least one arriving spark ignites `v`.
#[inline]
pub fn ignition_probability<T: Scalar>(
    v: CellIndex,
    lambda: T,
    grid: &GridState,
    params: &SpreadParams<T>,
) -> T {
    let rate = susceptibility(v, grid, params) * lambda;
    T::one() - (-rate).exp()
}

/// Potentials toward all 8 neighbors and the susceptibility of every cell,
/// for one grid and parameter set. Neither depends on the fire state, so a
/// run with fixed wind computes them once.
#[derive(Debug, Clone)]
pub struct SpreadTable<T> {
    dims: crate::grid::Dims,
    phi: Vec<[T; 8]>,
    gamma: Vec<T>,
}

impl<T: Scalar> SpreadTable<T> {
    pub fn new(grid: &GridState, params: &SpreadParams<T>) -> Self {
        let dims = grid.dims();
        let fuel = grid.fuel();
        let phi = (0..dims.len())
            .map(|i| std::array::from_fn(|k| potential_at(i, k, grid, params)))
            .collect();
        let gamma = (0..dims.len())
            .map(|i| {
                params
                    .alpha_gamma
                    .scale((1.0 + fuel.veg()[i]) * (1.0 + fuel.den()[i]))
            })
            .collect();
        Self { dims, phi, gamma }
    }

    /// A table for no cells, for code paths that never consult it.
    pub(crate) fn empty() -> Self {
        Self {
            dims: crate::grid::Dims::new(0, 0),
            phi: Vec::new(),
            gamma: Vec::new(),
        }
    }

    /// Same sum as [`arrival_intensity`], weights looked up by flat index.
    #[inline]
    pub fn intensity(&self, v: CellIndex, weight: impl Fn(usize) -> T) -> T {
        let mut lambda = T::zero();
        for (k, d) in NeighborOffset::ALL.iter().enumerate() {
            if let Some(u) = self.dims.neighbor(v, d.opposite()) {
                let ui = self.dims.index(u);
                let w = weight(ui);
                if w.value() == 0.0 {
                    continue;
                }
                lambda += w * self.phi[ui][k];
            }
        }
        lambda
    }

    /// Same value as [`ignition_probability`] for the cell at flat index `i`.
    #[inline]
    pub fn ignition_probability(&self, i: usize, lambda: T) -> T {
        let rate = self.gamma[i] * lambda;
        T::one() - (-rate).exp()
    }
}
