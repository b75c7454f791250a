//! Simulation state layers and neighbor geometry.
//!
//! Model-space axis convention: columns increase eastward (+x) and rows
//! increase northward (+y). Cell `(row, col)` lives at flat index
//! `row * width + col`. Raster files are stored north-up, so ingestion code
//! flips rows on the way in (see [`crate::geodata`]).

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("{layer} layer has dims {got:?}, expected {expected:?}")]
    DimensionMismatch {
        layer: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("grid dims must be at least 1x1, got {0:?}")]
    EmptyGrid((usize, usize)),
    #[error("{layer} value {value} at cell {index} is out of range {range}")]
    OutOfRange {
        layer: &'static str,
        index: usize,
        value: f64,
        range: &'static str,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cell ({row}, {col}) is outside grid {dims:?}")]
    CellOutOfBounds {
        row: usize,
        col: usize,
        dims: (usize, usize),
    },
}

/// Grid shape as `(height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_tuple(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn index(&self, cell: CellIndex) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell(&self, index: usize) -> CellIndex {
        CellIndex {
            row: index / self.width,
            col: index % self.width,
        }
    }

    /// The neighbor of `cell` in direction `d`, if it lies inside the grid.
    #[inline]
    pub fn neighbor(&self, cell: CellIndex, d: NeighborOffset) -> Option<CellIndex> {
        let row = cell.row as isize + d.dy as isize;
        let col = cell.col as isize + d.dx as isize;
        if row < 0 || col < 0 || row >= self.height as isize || col >= self.width as isize {
            None
        } else {
            Some(CellIndex {
                row: row as usize,
                col: col as usize,
            })
        }
    }
}

/// A cell position, always in bounds when built through [`CellIndex::new`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize, dims: Dims) -> Result<Self, GridError> {
        if row >= dims.height || col >= dims.width {
            return Err(GridError::CellOutOfBounds {
                row,
                col,
                dims: dims.as_tuple(),
            });
        }
        Ok(Self { row, col })
    }
}

/// One of the eight Moore-neighborhood directions.
///
/// `dx` is the column step (east positive), `dy` the row step (north positive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborOffset {
    pub dx: i8,
    pub dy: i8,
}

impl NeighborOffset {
    /// All offsets, counter-clockwise starting at east: E, NE, N, NW, W, SW, S, SE.
    /// Offset `k` points at angle `k * π/4`.
    pub const ALL: [NeighborOffset; 8] = [
        NeighborOffset { dx: 1, dy: 0 },
        NeighborOffset { dx: 1, dy: 1 },
        NeighborOffset { dx: 0, dy: 1 },
        NeighborOffset { dx: -1, dy: 1 },
        NeighborOffset { dx: -1, dy: 0 },
        NeighborOffset { dx: -1, dy: -1 },
        NeighborOffset { dx: 0, dy: -1 },
        NeighborOffset { dx: 1, dy: -1 },
    ];

    pub fn new(dx: i8, dy: i8) -> Option<Self> {
        let d = Self { dx, dy };
        Self::ALL.contains(&d).then_some(d)
    }

    /// Position of this offset in [`NeighborOffset::ALL`].
    pub fn ordinal(&self) -> usize {
        Self::ALL
            .iter()
            .position(|d| d == self)
            .expect("offset constructed outside NeighborOffset::ALL")
    }

    pub fn opposite(&self) -> Self {
        Self {
            dx: -self.dx,
            dy: -self.dy,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.dx != 0 && self.dy != 0
    }

    /// Euclidean length in cell units: 1 for cardinal, √2 for diagonal.
    pub fn length(&self) -> f64 {
        if self.is_diagonal() {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }
}

/// Direction of `d` in radians: east is 0, counting counter-clockwise, in `[0, 2π)`.
pub fn offset_angle(d: NeighborOffset) -> f64 {
    d.ordinal() as f64 * std::f64::consts::FRAC_PI_4
}

/// Wraps any finite angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Unburned = 0,
    Burning = 1,
    Burned = 2,
}

impl CellState {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Unburned),
            1 => Some(Self::Burning),
            2 => Some(Self::Burned),
            _ => None,
        }
    }
}

/// Dense per-cell fire state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FireState {
    dims: Dims,
    cells: Vec<CellState>,
}

impl FireState {
    pub fn unburned(dims: Dims) -> Self {
        Self {
            dims,
            cells: vec![CellState::Unburned; dims.len()],
        }
    }

    pub fn from_cells(dims: Dims, cells: Vec<CellState>) -> Result<Self, GridError> {
        if cells.len() != dims.len() {
            return Err(GridError::DimensionMismatch {
                layer: "fire",
                expected: dims.as_tuple(),
                got: (cells.len(), 1),
            });
        }
        Ok(Self { dims, cells })
    }

    /// All unburned except the given cells, which are set burning.
    pub fn with_ignitions(dims: Dims, ignitions: &[CellIndex]) -> Result<Self, GridError> {
        let mut fire = Self::unburned(dims);
        for &c in ignitions {
            let c = CellIndex::new(c.row, c.col, dims)?;
            fire.set(c, CellState::Burning);
        }
        Ok(fire)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, cell: CellIndex) -> CellState {
        self.cells[self.dims.index(cell)]
    }

    pub fn set(&mut self, cell: CellIndex, state: CellState) {
        let i = self.dims.index(cell);
        self.cells[i] = state;
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }
}

/// Per-cell wind speed and direction (radians from east, counter-clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    dims: Dims,
    speed: Vec<f64>,
    direction: Vec<f64>,
}

impl WindField {
    /// Validates speed ≥ 0 and wraps directions into `[0, 2π)`.
    pub fn new(dims: Dims, speed: Vec<f64>, direction: Vec<f64>) -> Result<Self, GridError> {
        check_len("wind speed", dims, speed.len())?;
        check_len("wind direction", dims, direction.len())?;
        for (i, &s) in speed.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(GridError::OutOfRange {
                    layer: "wind speed",
                    index: i,
                    value: s,
                    range: "[0, inf)",
                });
            }
        }
        let mut direction = direction;
        for (i, d) in direction.iter_mut().enumerate() {
            if !d.is_finite() {
                return Err(GridError::OutOfRange {
                    layer: "wind direction",
                    index: i,
                    value: *d,
                    range: "finite",
                });
            }
            *d = wrap_angle(*d);
        }
        Ok(Self {
            dims,
            speed,
            direction,
        })
    }

    pub fn uniform(dims: Dims, speed: f64, direction: f64) -> Result<Self, GridError> {
        Self::new(dims, vec![speed; dims.len()], vec![direction; dims.len()])
    }

    pub fn calm(dims: Dims) -> Self {
        Self {
            dims,
            speed: vec![0.0; dims.len()],
            direction: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }
}

/// Vegetation (canopy) and ground-fuel density modifiers, both in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuelField {
    dims: Dims,
    veg: Vec<f64>,
    den: Vec<f64>,
}

impl FuelField {
    /// Clamps both channels into `[-1, 1]`. NaN is rejected.
    pub fn new(dims: Dims, veg: Vec<f64>, den: Vec<f64>) -> Result<Self, GridError> {
        check_len("fuel veg", dims, veg.len())?;
        check_len("fuel den", dims, den.len())?;
        let clamp_channel = |layer: &'static str, v: Vec<f64>| -> Result<Vec<f64>, GridError> {
            v.into_iter()
                .enumerate()
                .map(|(i, x)| {
                    if x.is_nan() {
                        Err(GridError::OutOfRange {
                            layer,
                            index: i,
                            value: x,
                            range: "[-1, 1]",
                        })
                    } else {
                        Ok(x.clamp(-1.0, 1.0))
                    }
                })
                .collect()
        };
        Ok(Self {
            dims,
            veg: clamp_channel("fuel veg", veg)?,
            den: clamp_channel("fuel den", den)?,
        })
    }

    pub fn uniform(dims: Dims, veg: f64, den: f64) -> Result<Self, GridError> {
        Self::new(dims, vec![veg; dims.len()], vec![den; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn veg(&self) -> &[f64] {
        &self.veg
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }
}

/// Terrain inclination toward each of the eight neighbors, in radians.
/// Entry `[k]` of a cell corresponds to `NeighborOffset::ALL[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeField {
    dims: Dims,
    slopes: Vec<[f64; 8]>,
}

impl SlopeField {
    pub fn new(dims: Dims, slopes: Vec<[f64; 8]>) -> Result<Self, GridError> {
        check_len("slope", dims, slopes.len())?;
        for (i, s) in slopes.iter().enumerate() {
            if let Some(&bad) = s.iter().find(|x| !x.is_finite()) {
                return Err(GridError::OutOfRange {
                    layer: "slope",
                    index: i,
                    value: bad,
                    range: "finite",
                });
            }
        }
        Ok(Self { dims, slopes })
    }

    pub fn flat(dims: Dims) -> Self {
        Self {
            dims,
            slopes: vec![[0.0; 8]; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn at(&self, index: usize) -> &[f64; 8] {
        &self.slopes[index]
    }

    pub fn get(&self, cell: CellIndex, d: NeighborOffset) -> f64 {
        self.slopes[self.dims.index(cell)][d.ordinal()]
    }

    pub fn is_flat(&self) -> bool {
        self.slopes.iter().all(|s| s.iter().all(|&x| x == 0.0))
    }
}

fn check_len(layer: &'static str, dims: Dims, len: usize) -> Result<(), GridError> {
    if len != dims.len() {
        Err(GridError::DimensionMismatch {
            layer,
            expected: dims.as_tuple(),
            got: (len, 1),
        })
    } else {
        Ok(())
    }
}

/// The validated simulation layers. Cheap to clone: layers are shared.
///
/// `fire` is the initial fire layer; the engine advances fire layers
/// separately while wind, fuel and slope are read from here.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    dims: Dims,
    fire: Arc<FireState>,
    wind: Arc<WindField>,
    fuel: Arc<FuelField>,
    slope: Arc<SlopeField>,
}

impl GridState {
    pub fn new(
        dims: Dims,
        fire: FireState,
        wind: WindField,
        fuel: FuelField,
        slope: SlopeField,
    ) -> Result<Self, GridError> {
        if dims.is_empty() {
            return Err(GridError::EmptyGrid(dims.as_tuple()));
        }
        let layers = [
            ("fire", fire.dims()),
            ("wind", wind.dims()),
            ("fuel", fuel.dims()),
            ("slope", slope.dims()),
        ];
        for (layer, got) in layers {
            if got != dims {
                return Err(GridError::DimensionMismatch {
                    layer,
                    expected: dims.as_tuple(),
                    got: got.as_tuple(),
                });
            }
        }
        Ok(Self {
            dims,
            fire: Arc::new(fire),
            wind: Arc::new(wind),
            fuel: Arc::new(fuel),
            slope: Arc::new(slope),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn fire(&self) -> &FireState {
        &self.fire
    }

    pub fn wind(&self) -> &WindField {
        &self.wind
    }

    pub fn fuel(&self) -> &FuelField {
        &self.fuel
    }

    pub fn slope(&self) -> &SlopeField {
        &self.slope
    }

    /// Same layers with a different wind field.
    pub fn with_wind(&self, wind: WindField) -> Result<Self, GridError> {
        self.with_shared_wind(Arc::new(wind))
    }

    pub(crate) fn with_shared_wind(&self, wind: Arc<WindField>) -> Result<Self, GridError> {
        if wind.dims() != self.dims {
            return Err(GridError::DimensionMismatch {
                layer: "wind",
                expected: self.dims.as_tuple(),
                got: wind.dims().as_tuple(),
            });
        }
        Ok(Self {
            wind,
            ..self.clone()
        })
    }

    /// Same layers with a different initial fire layer.
    pub fn with_fire(&self, fire: FireState) -> Result<Self, GridError> {
        if fire.dims() != self.dims {
            return Err(GridError::DimensionMismatch {
                layer: "fire",
                expected: self.dims.as_tuple(),
                got: fire.dims().as_tuple(),
            });
        }
        Ok(Self {
            fire: Arc::new(fire),
            ..self.clone()
        })
    }
}

/// The six tunable spread parameters, generic over the scalar so they can
/// carry derivatives during calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadParams<T> {
    pub p_base: T,
    pub alpha_w1: T,
    pub alpha_w2: T,
    pub alpha_s: T,
    pub alpha_gamma: T,
    pub p_continue: T,
}

impl<T: Scalar> SpreadParams<T> {
    /// Parameter order used for calibration vectors.
    pub const NAMES: [&'static str; 6] = [
        "p_base",
        "alpha_w1",
        "alpha_w2",
        "alpha_s",
        "alpha_gamma",
        "p_continue",
    ];

    pub fn from_array(a: [T; 6]) -> Self {
        Self {
            p_base: a[0],
            alpha_w1: a[1],
            alpha_w2: a[2],
            alpha_s: a[3],
            alpha_gamma: a[4],
            p_continue: a[5],
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [
            self.p_base,
            self.alpha_w1,
            self.alpha_w2,
            self.alpha_s,
            self.alpha_gamma,
            self.p_continue,
        ]
    }

    pub fn lift<U: Scalar>(&self, f: impl Fn(usize, T) -> U) -> SpreadParams<U> {
        let a = self.to_array();
        SpreadParams::from_array(std::array::from_fn(|i| f(i, a[i])))
    }
}

/// Spread parameters plus the step limit used as the default horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub p_base: f64,
    pub alpha_w1: f64,
    pub alpha_w2: f64,
    pub alpha_s: f64,
    pub alpha_gamma: f64,
    pub p_continue: f64,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p_base: 0.3,
            alpha_w1: 0.1,
            alpha_w2: 0.2,
            alpha_s: 0.5,
            alpha_gamma: 1.0,
            p_continue: 0.6,
            max_steps: 200,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let params = self.params().to_array();
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(GridError::InvalidConfig(format!(
                "{} must be finite",
                SpreadParams::<f64>::NAMES[i]
            )));
        }
        if self.p_base <= 0.0 {
            return Err(GridError::InvalidConfig(format!(
                "p_base must be > 0, got {}",
                self.p_base
            )));
        }
        if self.alpha_gamma <= 0.0 {
            return Err(GridError::InvalidConfig(format!(
                "alpha_gamma must be > 0, got {}",
                self.alpha_gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.p_continue) {
            return Err(GridError::InvalidConfig(format!(
                "p_continue must be in [0, 1], got {}",
                self.p_continue
            )));
        }
        if self.max_steps == 0 {
            return Err(GridError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> SpreadParams<f64> {
        SpreadParams {
            p_base: self.p_base,
            alpha_w1: self.alpha_w1,
            alpha_w2: self.alpha_w2,
            alpha_s: self.alpha_s,
            alpha_gamma: self.alpha_gamma,
            p_continue: self.p_continue,
        }
    }

    pub fn with_params(&self, p: SpreadParams<f64>) -> Self {
        Self {
            p_base: p.p_base,
            alpha_w1: p.alpha_w1,
            alpha_w2: p.alpha_w2,
            alpha_s: p.alpha_s,
            alpha_gamma: p.alpha_gamma,
            p_continue: p.p_continue,
            max_steps: self.max_steps,
        }
    }
}

/// Angle difference helper used by tests and the kernel: `a - b` wrapped into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}
