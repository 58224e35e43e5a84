//! Run configuration.
//!
//! TOML with one table per section; dotted keys (`memory.r = 50.0`) are
//! equivalent. Unknown keys are rejected. Every section is optional and falls
//! back to the defaults below.

use std::path::PathBuf;

use oam_memory::kernels::{GridSpec, MemoryParams};
use oam_memory::memory_cycle::{Engine, SearchRange};
use oam_memory::modes::{BeamGeometry, CellGeometry};
use oam_memory::{AreaConvention, ChiNormalization, Drive, ModeIndex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub conventions: ConventionConfig,
    pub memory: MemoryConfig,
    pub grids: GridConfig,
    pub scan: ScanConfig,
    pub cycle: CycleConfig,
    pub optimize: OptimizeConfig,
    pub output: OutputConfig,
}

/// Beam and cell geometry. Lengths share one arbitrary unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub w0: f64,
    pub lambda: f64,
    /// Drive waist offset in Rayleigh ranges.
    pub zs_ratio: f64,
    pub cell_length: Option<f64>,
    pub cell_area: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { w0: 1e-4, lambda: 8e-7, zs_ratio: 0.0, cell_length: None, cell_area: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConventionConfig {
    pub area: AreaConvention,
    pub chi_norm: ChiNormalization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub r: f64,
    pub l_tilde: f64,
    pub t_write: f64,
    /// Defaults to `t_write`.
    pub t_read: Option<f64>,
    pub epsilon2: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig { r: 50.0, l_tilde: 100.0, t_write: 10.0, t_read: None, epsilon2: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nz: usize,
    pub nt: usize,
    pub kernel_substeps: Option<usize>,
    pub pde_substeps: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig { nz: g.nz, nt: g.nt, kernel_substeps: None, pde_substeps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub l: Vec<i64>,
    /// Drive indices; one curve per `(l, m)` pair.
    pub m: Vec<i64>,
    pub zs_min: f64,
    pub zs_max: f64,
    pub zs_points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { l: (0..=5).collect(), m: vec![0], zs_min: 0.0, zs_max: 50.0, zs_points: 100 }
    }
}

/// Named scan families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ScanPreset {
    /// Storage without conversion: m = 0, l = 0..5, shift up to 50 z_R.
    Fig3,
    /// Gaussian signal with drives J = 1..5.
    Fig4,
    /// Drive J = 1, l = 1..6.
    Fig5Top,
    /// Drive J = -1, l = 1..6.
    Fig5Bottom,
}

impl ScanPreset {
    pub fn scan(self) -> ScanConfig {
        let near = |l: Vec<i64>, m: Vec<i64>| ScanConfig { l, m, zs_min: 0.0, zs_max: 5.0, zs_points: 101 };
        match self {
            ScanPreset::Fig3 => ScanConfig::default(),
            ScanPreset::Fig4 => near(vec![0], (1..=5).collect()),
            ScanPreset::Fig5Top => near((1..=6).collect(), vec![1]),
            ScanPreset::Fig5Bottom => near((1..=6).collect(), vec![-1]),
        }
    }
}

/// Which input pulse a cycle stores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputShape {
    /// Gaussian centred at `center * T_W` with width `width * T_W`.
    #[default]
    Gaussian,
    /// Leading input mode of the plane-wave kernel.
    Leading,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub l: i64,
    /// Write drive OAM; absent means a plane wave.
    pub write: Option<i64>,
    /// Read drive OAM; absent means a plane wave.
    pub read: Option<i64>,
    pub engine: Engine,
    pub input: InputShape,
    pub center: f64,
    pub width: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig { l: 0, write: None, read: None, engine: Engine::Kernel, input: InputShape::Gaussian, center: 0.5, width: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub l_min: f64,
    pub l_max: f64,
    pub l_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub nz: usize,
    pub nt: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { l_min: 1.0, l_max: 200.0, l_points: 20, t_min: 1.0, t_max: 40.0, t_points: 20, nz: 40, nt: 40 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

fn invalid(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {why}"))
}

fn index(key: &str, v: i64) -> Result<ModeIndex, CliError> {
    ModeIndex::new(v).map_err(|e| invalid(key, e))
}

fn drive(key: &str, v: Option<i64>) -> Result<Drive, CliError> {
    Ok(match v {
        None => Drive::PlaneWave,
        Some(m) => Drive::LaguerreGauss(index(key, m)?),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, in hex.
    /// Digest of the physics-bearing settings; the output location is excluded.
    pub fn hash(&self) -> String {
        let mut physics = self.clone();
        physics.output = Default::default();
        let canonical = toml::to_string(&physics).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Drive beam at the configured offset; the paraxial condition is enforced.
    pub fn beam(&self) -> Result<BeamGeometry<f64>, CliError> {
        let g = &self.geometry;
        BeamGeometry::with_offset_ratio(g.w0, g.lambda, g.zs_ratio).map_err(|e| invalid("geometry", e))
    }

    /// Beam without the paraxial requirement, for reporting.
    pub fn beam_unchecked(&self) -> Result<BeamGeometry<f64>, CliError> {
        let g = &self.geometry;
        let probe = BeamGeometry::raw(g.w0, g.lambda, 0.0).map_err(|e| invalid("geometry", e))?;
        BeamGeometry::raw(g.w0, g.lambda, g.zs_ratio * probe.rayleigh_range()).map_err(|e| invalid("geometry.zs_ratio", e))
    }

    pub fn cell(&self) -> Result<Option<CellGeometry<f64>>, CliError> {
        match (self.geometry.cell_length, self.geometry.cell_area) {
            (None, None) => Ok(None),
            (Some(length), Some(area)) => CellGeometry::new(length, area).map(Some).map_err(|e| invalid("geometry.cell_length", e)),
            (Some(_), None) => Err(invalid("geometry.cell_area", "required when geometry.cell_length is set")),
            (None, Some(_)) => Err(invalid("geometry.cell_length", "required when geometry.cell_area is set")),
        }
    }

    pub fn params(&self) -> Result<MemoryParams<f64>, CliError> {
        let m = &self.memory;
        let p = MemoryParams {
            r: m.r,
            chi_eff: 1.0,
            l_tilde: m.l_tilde,
            t_write: m.t_write,
            t_read: m.t_read.unwrap_or(m.t_write),
            epsilon2: m.epsilon2,
        };
        p.validate().map_err(|e| invalid("memory", e))?;
        Ok(p)
    }

    pub fn grids(&self) -> Result<GridSpec, CliError> {
        let g = &self.grids;
        let spec = GridSpec { nz: g.nz, nt: g.nt, kernel_substeps: g.kernel_substeps, pde_substeps: g.pde_substeps };
        spec.validate().map_err(|e| invalid("grids", e))?;
        Ok(spec)
    }

    pub fn scan_indices(&self) -> Result<(Vec<ModeIndex>, Vec<ModeIndex>), CliError> {
        let l = self.scan.l.iter().map(|&v| index("scan.l", v)).collect::<Result<_, _>>()?;
        let m = self.scan.m.iter().map(|&v| index("scan.m", v)).collect::<Result<_, _>>()?;
        Ok((l, m))
    }

    pub fn scan_grid(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.scan;
        if s.zs_points == 0 {
            return Err(invalid("scan.zs_points", "must be at least 1"));
        }
        if !(s.zs_min >= 0.0) || (s.zs_points > 1 && !(s.zs_max > s.zs_min)) {
            return Err(invalid("scan.zs_max", "range must satisfy 0 <= zs_min < zs_max"));
        }
        Ok(SearchRange::linspace(s.zs_min, s.zs_max, s.zs_points).values)
    }

    pub fn cycle_drives(&self) -> Result<(ModeIndex, Drive, Drive), CliError> {
        let c = &self.cycle;
        if !(c.width > 0.0) || !(0.0..=1.0).contains(&c.center) {
            return Err(invalid("cycle.width", "pulse needs width > 0 and 0 <= center <= 1"));
        }
        Ok((index("cycle.l", c.l)?, drive("cycle.write", c.write)?, drive("cycle.read", c.read)?))
    }

    pub fn search(&self) -> Result<(SearchRange<f64>, SearchRange<f64>, GridSpec), CliError> {
        let o = &self.optimize;
        let range = |key: &str, lo: f64, hi: f64, n: usize| {
            if n == 0 {
                return Err(invalid(key, "empty search range"));
            }
            if !(lo > 0.0) || hi < lo {
                return Err(invalid(key, "range must satisfy 0 < min <= max"));
            }
            Ok(SearchRange::linspace(lo, hi, n))
        };
        let grids = GridSpec::new(o.nz, o.nt);
        grids.validate().map_err(|e| invalid("optimize.nz", e))?;
        Ok((range("optimize.l_points", o.l_min, o.l_max, o.l_points)?, range("optimize.t_points", o.t_min, o.t_max, o.t_points)?, grids))
    }
}
