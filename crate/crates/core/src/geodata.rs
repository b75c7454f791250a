//! Building grid layers from rasters.
//!
//! Rasters use the ESRI ASCII grid layout: a header of `key value` lines
//! (`ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`, optional
//! `NODATA_value`; keys are case-insensitive) followed by `nrows` lines of
//! `ncols` values, northernmost row first. [`Raster`] keeps that file order;
//! the conversions to grid layers flip rows into model space, where row 0 is
//! the southern edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use thiserror::Error;

use crate::grid::{
    CellIndex, Dims, FireState, FuelField, GridError, GridState, NeighborOffset, SlopeField, WindField,
};
use crate::rng::RngKey;

/// The shipped fuel table for the eleven WorldCover classes.
pub const WORLDCOVER_FUEL_TABLE: &str = include_str!("../data/worldcover_fuel.txt");

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} values, found {got}")]
    RowLength { line: usize, expected: usize, got: usize },
    #[error("expected {expected} data rows, found {got}")]
    RowCount { expected: usize, got: usize },
    #[error("line {line}: non-numeric token {token:?}")]
    NonNumeric { line: usize, token: String },
    #[error("landcover class code {0} has no fuel table entry")]
    UnknownClass(i64),
    #[error("landcover value {value} at row {row}, col {col} is not an integer class code")]
    NonIntegerClass { row: usize, col: usize, value: f64 },
    #[error("fuel table line {line}: {msg}")]
    FuelTable { line: usize, msg: String },
    #[error("rasters disagree: {0}")]
    RasterMismatch(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

/// A north-up raster in file row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nrows: usize,
    pub ncols: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    /// Row-major, first row is the northern edge.
    pub values: Vec<f64>,
}

impl Raster {
    pub fn new(
        nrows: usize,
        ncols: usize,
        cellsize: f64,
        nodata: Option<f64>,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        let r = Self {
            nrows,
            ncols,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize,
            nodata,
            values,
        };
        r.validate()?;
        Ok(r)
    }

    /// Builds a raster from a model-space layer (row 0 = south).
    pub fn from_model(dims: Dims, cellsize: f64, nodata: Option<f64>, model: &[f64]) -> Result<Self, GeoError> {
        if model.len() != dims.len() {
            return Err(GeoError::InvalidRaster(format!(
                "{} values for a {}x{} grid",
                model.len(),
                dims.height,
                dims.width
            )));
        }
        let mut values = Vec::with_capacity(model.len());
        for file_row in 0..dims.height {
            let r = dims.height - 1 - file_row;
            values.extend_from_slice(&model[r * dims.width..(r + 1) * dims.width]);
        }
        Self::new(dims.height, dims.width, cellsize, nodata, values)
    }

    fn validate(&self) -> Result<(), GeoError> {
        if self.nrows == 0 || self.ncols == 0 {
            return Err(GeoError::InvalidRaster("dims must be at least 1x1".into()));
        }
        if !(self.cellsize > 0.0) {
            return Err(GeoError::InvalidRaster(format!(
                "cellsize must be positive, got {}",
                self.cellsize
            )));
        }
        if self.values.len() != self.nrows * self.ncols {
            return Err(GeoError::InvalidRaster(format!(
                "{} values for {}x{}",
                self.values.len(),
                self.nrows,
                self.ncols
            )));
        }
        Ok(())
    }

    /// Model-space dims (same shape as the file).
    pub fn dims(&self) -> Dims {
        Dims::new(self.nrows, self.ncols)
    }

    /// Value at a model-space cell.
    pub fn at_model(&self, cell: CellIndex) -> f64 {
        self.values[self.model_to_file(cell)]
    }

    fn model_to_file(&self, cell: CellIndex) -> usize {
        (self.nrows - 1 - cell.row) * self.ncols + cell.col
    }

    pub fn is_nodata_value(&self, v: f64) -> bool {
        self.nodata == Some(v)
    }

    pub fn is_nodata_model(&self, cell: CellIndex) -> bool {
        self.is_nodata_value(self.at_model(cell))
    }

    /// All values in model order (row 0 = south).
    pub fn model_values(&self) -> Vec<f64> {
        let dims = self.dims();
        (0..dims.len()).map(|i| self.at_model(dims.cell(i))).collect()
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, GeoError> {
    token.parse::<f64>().map_err(|_| GeoError::NonNumeric {
        line,
        token: token.to_string(),
    })
}

/// Parses an ESRI ASCII grid.
pub fn parse_ascii_grid<R: Read>(reader: R) -> Result<Raster, GeoError> {
    let reader = BufReader::new(reader);
    let mut header: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ncols: Option<usize> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().expect("nonempty line");
        let in_header = rows.is_empty() && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if in_header {
            let key = first.to_ascii_lowercase();
            let value = tokens
                .next()
                .ok_or_else(|| GeoError::MalformedHeader(format!("line {line_no}: {key} has no value")))?;
            if tokens.next().is_some() {
                return Err(GeoError::MalformedHeader(format!(
                    "line {line_no}: trailing tokens after {key}"
                )));
            }
            let value = value.parse::<f64>().map_err(|_| {
                GeoError::MalformedHeader(format!("line {line_no}: {key} value {value:?} is not a number"))
            })?;
            if header.insert(key.clone(), (value, line_no)).is_some() {
                return Err(GeoError::MalformedHeader(format!("duplicate key {key}")));
            }
            continue;
        }
        let expected = match ncols {
            Some(n) => n,
            None => {
                let n = header_count(&header, "ncols")?;
                ncols = Some(n);
                n
            }
        };
        let values = trimmed
            .split_whitespace()
            .map(|t| parse_number(t, line_no))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != expected {
            return Err(GeoError::RowLength {
                line: line_no,
                expected,
                got: values.len(),
            });
        }
        rows.push(values);
    }

    let ncols = header_count(&header, "ncols")?;
    let nrows = header_count(&header, "nrows")?;
    let corner = |corner: &str, center: &str| -> Result<f64, GeoError> {
        match (header.get(corner), header.get(center)) {
            (Some(&(v, _)), None) => Ok(v),
            (None, Some(&(v, _))) => Ok(v),
            (Some(_), Some(_)) => Err(GeoError::MalformedHeader(format!("both {corner} and {center} given"))),
            (None, None) => Err(GeoError::MalformedHeader(format!("missing {corner}"))),
        }
    };
    let xll = corner("xllcorner", "xllcenter")?;
    let yll = corner("yllcorner", "yllcenter")?;
    let cellsize = header
        .get("cellsize")
        .map(|&(v, _)| v)
        .ok_or_else(|| GeoError::MalformedHeader("missing cellsize".into()))?;
    let nodata = header.get("nodata_value").map(|&(v, _)| v);
    for key in header.keys() {
        if !matches!(
            key.as_str(),
            "ncols" | "nrows" | "xllcorner" | "yllcorner" | "xllcenter" | "yllcenter" | "cellsize" | "nodata_value"
        ) {
            return Err(GeoError::MalformedHeader(format!("unknown key {key}")));
        }
    }
    if rows.len() != nrows {
        return Err(GeoError::RowCount {
            expected: nrows,
            got: rows.len(),
        });
    }
    let mut raster = Raster::new(nrows, ncols, cellsize, nodata, rows.into_iter().flatten().collect())?;
    raster.xllcorner = xll;
    raster.yllcorner = yll;
    Ok(raster)
}

fn header_count(header: &BTreeMap<String, (f64, usize)>, key: &str) -> Result<usize, GeoError> {
    let &(v, line) = header
        .get(key)
        .ok_or_else(|| GeoError::MalformedHeader(format!("missing {key}")))?;
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(GeoError::MalformedHeader(format!(
            "line {line}: {key} must be a positive integer, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Writes a raster in ASCII grid form. Values use the shortest decimal that
/// parses back to the same `f64`.
pub fn write_ascii_grid(r: &Raster) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", r.ncols);
    let _ = writeln!(out, "nrows {}", r.nrows);
    let _ = writeln!(out, "xllcorner {}", r.xllcorner);
    let _ = writeln!(out, "yllcorner {}", r.yllcorner);
    let _ = writeln!(out, "cellsize {}", r.cellsize);
    if let Some(nd) = r.nodata {
        let _ = writeln!(out, "NODATA_value {nd}");
    }
    for row in r.values.chunks(r.ncols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Inclination toward each neighbor: `atan(Δelevation / (cellsize·‖Δ‖))`.
///
/// Directions leaving the raster, and every direction touching a nodata cell,
/// get slope 0.
pub fn slope_from_dem(dem: &Raster) -> SlopeField {
    let dims = dem.dims();
    let slopes = (0..dims.len())
        .map(|i| {
            let u = dims.cell(i);
            let mut s = [0.0; 8];
            if dem.is_nodata_model(u) {
                return s;
            }
            let eu = dem.at_model(u);
            for (k, d) in NeighborOffset::ALL.iter().enumerate() {
                if let Some(v) = dims.neighbor(u, *d) {
                    if dem.is_nodata_model(v) {
                        continue;
                    }
                    let run = dem.cellsize * d.length();
                    s[k] = ((dem.at_model(v) - eu) / run).atan();
                }
            }
            s
        })
        .collect();
    SlopeField::new(dims, slopes).expect("finite elevations give finite slopes")
}

/// Landcover class code → `(μ_veg, μ_den)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FuelTable {
    entries: BTreeMap<i64, (f64, f64)>,
    default: Option<(f64, f64)>,
}

impl FuelTable {
    /// Parses `code mu_veg mu_den` lines. `#` starts a comment; a line whose
    /// code is `default` sets the fallback for unlisted codes.
    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let mut table = FuelTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| GeoError::FuelTable { line: line_no, msg };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", tokens.len())));
            }
            let modifier = |t: &str| -> Result<f64, GeoError> {
                let v: f64 = t.parse().map_err(|_| err(format!("{t:?} is not a number")))?;
                if !(-1.0..=1.0).contains(&v) {
                    return Err(err(format!("modifier {v} outside [-1, 1]")));
                }
                Ok(v)
            };
            let pair = (modifier(tokens[1])?, modifier(tokens[2])?);
            if tokens[0].eq_ignore_ascii_case("default") {
                table.default = Some(pair);
            } else {
                let code: i64 = tokens[0]
                    .parse()
                    .map_err(|_| err(format!("class code {:?} is not an integer", tokens[0])))?;
                if table.entries.insert(code, pair).is_some() {
                    return Err(err(format!("duplicate class code {code}")));
                }
            }
        }
        Ok(table)
    }

    pub fn worldcover() -> Self {
        Self::parse(WORLDCOVER_FUEL_TABLE).expect("shipped table parses")
    }

    pub fn insert(&mut self, code: i64, veg: f64, den: f64) {
        self.entries.insert(code, (veg.clamp(-1.0, 1.0), den.clamp(-1.0, 1.0)));
    }

    pub fn set_default(&mut self, veg: f64, den: f64) {
        self.default = Some((veg.clamp(-1.0, 1.0), den.clamp(-1.0, 1.0)));
    }

    pub fn lookup(&self, code: i64) -> Result<(f64, f64), GeoError> {
        self.entries
            .get(&code)
            .copied()
            .or(self.default)
            .ok_or(GeoError::UnknownClass(code))
    }
}

/// Per-cell fuel from landcover codes; nodata cells become unburnable `(−1, −1)`.
pub fn fuel_from_landcover(lc: &Raster, table: &FuelTable) -> Result<FuelField, GeoError> {
    let dims = lc.dims();
    let mut veg = Vec::with_capacity(dims.len());
    let mut den = Vec::with_capacity(dims.len());
    for i in 0..dims.len() {
        let cell = dims.cell(i);
        let v = lc.at_model(cell);
        if lc.is_nodata_value(v) {
            veg.push(-1.0);
            den.push(-1.0);
            continue;
        }
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(GeoError::NonIntegerClass {
                row: lc.nrows - 1 - cell.row,
                col: cell.col,
                value: v,
            });
        }
        let (a, b) = table.lookup(v as i64)?;
        veg.push(a);
        den.push(b);
    }
    Ok(FuelField::new(dims, veg, den)?)
}

/// Assembles a grid from co-registered elevation and landcover rasters.
///
/// Both rasters must share dims and cellsize. Cells with nodata elevation are
/// made unburnable.
pub fn grid_from_rasters(
    dem: &Raster,
    landcover: &Raster,
    table: &FuelTable,
    wind: WindField,
    ignitions: &[CellIndex],
) -> Result<GridState, GeoError> {
    if dem.dims() != landcover.dims() {
        return Err(GeoError::RasterMismatch(format!(
            "DEM is {}x{}, landcover is {}x{}",
            dem.nrows, dem.ncols, landcover.nrows, landcover.ncols
        )));
    }
    if dem.cellsize != landcover.cellsize {
        return Err(GeoError::RasterMismatch(format!(
            "DEM cellsize {} differs from landcover cellsize {}",
            dem.cellsize, landcover.cellsize
        )));
    }
    let dims = dem.dims();
    let fuel = fuel_from_landcover(landcover, table)?;
    let (mut veg, mut den) = (fuel.veg().to_vec(), fuel.den().to_vec());
    for i in 0..dims.len() {
        if dem.is_nodata_model(dims.cell(i)) {
            veg[i] = -1.0;
            den[i] = -1.0;
        }
    }
    let fuel = FuelField::new(dims, veg, den)?;
    let fire = FireState::with_ignitions(dims, ignitions)?;
    Ok(GridState::new(dims, fire, wind, fuel, slope_from_dem(dem))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOptions {
    /// Fraction of cells covered by burnable forest, in `[0, 1]`.
    pub forest_density: f64,
    /// Peak elevation deviation in meters; 0 gives flat terrain.
    pub elevation_roughness: f64,
    pub cellsize: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
    /// Initial burning cell; defaults to the grid center.
    pub ignition: Option<CellIndex>,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            forest_density: 0.8,
            elevation_roughness: 20.0,
            cellsize: 30.0,
            wind_speed: 0.0,
            wind_direction: 0.0,
            ignition: None,
        }
    }
}

const ELEVATION_STREAM: u64 = 1;
const FOREST_STREAM: u64 = 2;
const VEG_STREAM: u64 = 3;
const DEN_STREAM: u64 = 4;

/// White noise in `[-0.5, 0.5)` smoothed by three passes of a 5×5 box blur.
fn smoothed_noise(dims: Dims, key: RngKey) -> Vec<f64> {
    let sampler = key.sampler();
    let mut field: Vec<f64> = (0..dims.len()).map(|i| sampler.uniform(i as u64) - 0.5).collect();
    let radius = 2isize;
    for _ in 0..3 {
        let mut next = vec![0.0; dims.len()];
        for r in 0..dims.height as isize {
            for c in 0..dims.width as isize {
                let mut acc = 0.0;
                let mut n = 0.0;
                for rr in (r - radius).max(0)..=(r + radius).min(dims.height as isize - 1) {
                    for cc in (c - radius).max(0)..=(c + radius).min(dims.width as isize - 1) {
                        acc += field[rr as usize * dims.width + cc as usize];
                        n += 1.0;
                    }
                }
                next[r as usize * dims.width + c as usize] = acc / n;
            }
        }
        field = next;
    }
    field
}

/// A reproducible random landscape: smoothed-noise terrain, forest patches
/// from thresholded noise, uniform wind and a single ignition.
///
/// Forest covers `forest_density` of the cells (the lowest noise ranks); all
/// other cells are unburnable.
pub fn synthetic_environment(dims: Dims, seed: u64, opts: &SyntheticOptions) -> Result<GridState, GeoError> {
    if dims.height < 2 || dims.width < 2 {
        return Err(GeoError::InvalidRaster("synthetic grids must be at least 2x2".into()));
    }
    if !(0.0..=1.0).contains(&opts.forest_density) {
        return Err(GeoError::InvalidRaster(format!(
            "forest density {} outside [0, 1]",
            opts.forest_density
        )));
    }
    if !(opts.elevation_roughness >= 0.0) {
        return Err(GeoError::InvalidRaster("elevation roughness must be nonnegative".into()));
    }
    let key = RngKey::new(seed);

    let elevation: Vec<f64> = if opts.elevation_roughness == 0.0 {
        vec![0.0; dims.len()]
    } else {
        let noise = smoothed_noise(dims, key.with_stream(ELEVATION_STREAM));
        let peak = noise.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        noise
            .iter()
            .map(|x| if peak > 0.0 { opts.elevation_roughness * x / peak } else { 0.0 })
            .collect()
    };
    let dem = Raster::from_model(dims, opts.cellsize, None, &elevation)?;

    let noise = smoothed_noise(dims, key.with_stream(FOREST_STREAM));
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by(|&a, &b| noise[a].total_cmp(&noise[b]).then(a.cmp(&b)));
    let n_forest = (opts.forest_density * dims.len() as f64).round() as usize;
    let mut veg = vec![-1.0; dims.len()];
    let mut den = vec![-1.0; dims.len()];
    let (vs, ds) = (
        key.with_stream(VEG_STREAM).sampler(),
        key.with_stream(DEN_STREAM).sampler(),
    );
    for &i in &order[..n_forest] {
        veg[i] = 0.2 + 0.4 * vs.uniform(i as u64);
        den[i] = 0.4 * ds.uniform(i as u64);
    }
    let fuel = FuelField::new(dims, veg, den)?;
    let wind = WindField::uniform(dims, opts.wind_speed, opts.wind_direction)?;
    let ignition = opts.ignition.unwrap_or(CellIndex {
        row: dims.height / 2,
        col: dims.width / 2,
    });
    let fire = FireState::with_ignitions(dims, &[ignition])?;
    Ok(GridState::new(dims, fire, wind, fuel, slope_from_dem(&dem))?)
}
