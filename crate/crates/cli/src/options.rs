//! Flag groups shared by several commands.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use emberline::geodata::{grid_from_rasters, parse_ascii_grid, synthetic_environment, FuelTable, GeoError, SyntheticOptions};
use emberline::{CellIndex, Dims, GridState, SimConfig, WindField};

use crate::manifest::Manifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    /// Procedurally generated terrain and forest.
    Synthetic,
    /// Elevation and landcover from ASCII grid files.
    Files,
}

impl EnvKind {
    fn name(self) -> &'static str {
        match self {
            EnvKind::Synthetic => "synthetic",
            EnvKind::Files => "files",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    /// Where the landscape comes from.
    #[arg(long, value_enum, default_value_t = EnvKind::Synthetic)]
    pub env: EnvKind,
    /// Synthetic grid height in cells.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Synthetic grid width in cells.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Seed of the synthetic terrain and forest.
    #[arg(long, default_value_t = 0)]
    pub terrain_seed: u64,
    /// Fraction of synthetic cells covered by forest.
    #[arg(long, default_value_t = 0.8)]
    pub forest_density: f64,
    /// Peak synthetic elevation deviation in meters.
    #[arg(long, default_value_t = 20.0)]
    pub roughness: f64,
    /// Synthetic cell size in meters.
    #[arg(long, default_value_t = 30.0)]
    pub cellsize: f64,
    /// Wind speed in m/s.
    #[arg(long, default_value_t = 0.0)]
    pub wind_speed: f64,
    /// Direction the wind blows toward, radians counter-clockwise from east.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub wind_direction: f64,
    /// Elevation raster (ESRI ASCII grid), for `--env files`.
    #[arg(long)]
    pub dem: Option<PathBuf>,
    /// Landcover class raster (ESRI ASCII grid), for `--env files`.
    #[arg(long)]
    pub landcover: Option<PathBuf>,
    /// Fuel table mapping class codes to modifiers; defaults to the WorldCover table.
    #[arg(long)]
    pub fuel_table: Option<PathBuf>,
    /// Initial burning cell as ROW,COL (row 0 is the southern edge); defaults to the center.
    #[arg(long, value_parser = parse_cell)]
    pub ignition: Option<(usize, usize)>,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
    let r = r.trim().parse().map_err(|_| format!("bad row in {s:?}"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column in {s:?}"))?;
    Ok((r, c))
}

/// A landscape ready to simulate, with the cell size used for raster output.
pub struct Landscape {
    pub grid: GridState,
    pub cellsize: f64,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Input(format!("cannot create directory {}: {e}", path.display())))
}

fn raster_error(path: &Path, e: GeoError) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

impl LandscapeArgs {
    pub fn record(&self, m: &mut Manifest) {
        m.set("env", self.env.name());
        match self.env {
            EnvKind::Synthetic => {
                m.set("height", self.height)
                    .set("width", self.width)
                    .set("terrain-seed", self.terrain_seed)
                    .set("forest-density", self.forest_density)
                    .set("roughness", self.roughness)
                    .set("cellsize", self.cellsize);
            }
            EnvKind::Files => {
                for (key, path) in [("dem", &self.dem), ("landcover", &self.landcover), ("fuel-table", &self.fuel_table)] {
                    if let Some(p) = path {
                        m.set(key, p.display());
                    }
                }
            }
        }
        m.set("wind-speed", self.wind_speed).set("wind-direction", self.wind_direction);
        if let Some((r, c)) = self.ignition {
            m.set("ignition", format!("{r},{c}"));
        }
    }

    fn ignition_cell(&self, dims: Dims) -> Result<CellIndex, CliError> {
        let (row, col) = self.ignition.unwrap_or((dims.height / 2, dims.width / 2));
        CellIndex::new(row, col, dims).map_err(|e| CliError::Usage(format!("--ignition: {e}")))
    }

    pub fn build(&self) -> Result<Landscape, CliError> {
        match self.env {
            EnvKind::Synthetic => {
                let dims = Dims::new(self.height, self.width);
                let opts = SyntheticOptions {
                    forest_density: self.forest_density,
                    elevation_roughness: self.roughness,
                    cellsize: self.cellsize,
                    wind_speed: self.wind_speed,
                    wind_direction: self.wind_direction,
                    ignition: Some(self.ignition_cell(dims)?),
                };
                let grid = synthetic_environment(dims, self.terrain_seed, &opts)
                    .map_err(|e| CliError::Usage(format!("synthetic landscape: {e}")))?;
                Ok(Landscape {
                    grid,
                    cellsize: self.cellsize,
                })
            }
            EnvKind::Files => {
                let (Some(dem_path), Some(lc_path)) = (&self.dem, &self.landcover) else {
                    return Err(CliError::Usage("--env files needs both --dem and --landcover".into()));
                };
                let dem = parse_ascii_grid(read_text(dem_path)?.as_bytes()).map_err(|e| raster_error(dem_path, e))?;
                let lc = parse_ascii_grid(read_text(lc_path)?.as_bytes()).map_err(|e| raster_error(lc_path, e))?;
                let table = match &self.fuel_table {
                    Some(p) => FuelTable::parse(&read_text(p)?).map_err(|e| raster_error(p, e))?,
                    None => FuelTable::worldcover(),
                };
                let dims = dem.dims();
                let wind = WindField::uniform(dims, self.wind_speed, self.wind_direction)
                    .map_err(|e| CliError::Usage(format!("wind: {e}")))?;
                let ignition = self.ignition_cell(dims)?;
                let grid = grid_from_rasters(&dem, &lc, &table, wind, &[ignition])
                    .map_err(|e| CliError::Input(format!("{} / {}: {e}", dem_path.display(), lc_path.display())))?;
                Ok(Landscape {
                    grid,
                    cellsize: dem.cellsize,
                })
            }
        }
    }
}

/// Overrides for the six spread parameters.
#[derive(Debug, Clone, Args)]
pub struct SpreadArgs {
    #[arg(long)]
    pub p_base: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_w1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_w2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_s: Option<f64>,
    #[arg(long)]
    pub alpha_gamma: Option<f64>,
    #[arg(long)]
    pub p_continue: Option<f64>,
}

impl SpreadArgs {
    /// `base` with any given overrides applied, validated.
    pub fn resolve(&self, base: SimConfig) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            p_base: self.p_base.unwrap_or(base.p_base),
            alpha_w1: self.alpha_w1.unwrap_or(base.alpha_w1),
            alpha_w2: self.alpha_w2.unwrap_or(base.alpha_w2),
            alpha_s: self.alpha_s.unwrap_or(base.alpha_s),
            alpha_gamma: self.alpha_gamma.unwrap_or(base.alpha_gamma),
            p_continue: self.p_continue.unwrap_or(base.p_continue),
            max_steps: base.max_steps,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn record_spread(m: &mut Manifest, cfg: &SimConfig) {
    m.set("p-base", cfg.p_base)
        .set("alpha-w1", cfg.alpha_w1)
        .set("alpha-w2", cfg.alpha_w2)
        .set("alpha-s", cfg.alpha_s)
        .set("alpha-gamma", cfg.alpha_gamma)
        .set("p-continue", cfg.p_continue);
}
