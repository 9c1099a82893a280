//! The run configuration file (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [geometry]
//! nviews = 25
//! arc_deg = 50.0
//!
//! [lowres]
//! dims = [72, 32, 10]
//! alpha_x = 0.5555555555555556
//! eps1 = 0.015
//!
//! [solver]
//! gamma = 5.0
//! beta = 100.0
//! rho = 1.75
//! ```
//!
//! Every section and key is optional; omitted values take the desk-scale
//! defaults below.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::grid::{DetectorGrid, VolumeGrid};
use crate::pipeline::{
    CoupledProblemConfig, DisplayConfig, SolverParams, TikhonovConfig, LOG_FLOOR,
};
use crate::sim::{ArtifactSpec, NoiseSpec, PhantomSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub nviews: usize,
    pub arc_deg: f64,
    pub source_to_isocenter: f64,
    pub source_to_detector: f64,
    /// Full-resolution detector size `[nu, nv]`.
    pub detector: [usize; 2],
    /// Full-resolution pixel pitch (cm).
    pub pitch: [f64; 2],
    /// Binning from the full-resolution detector to the low-resolution one.
    pub bin: [usize; 2],
    /// Full-resolution detector rows `[lo, hi)` used for the flat field.
    pub strip: [usize; 2],
    pub log_floor: f64,
    /// Shift `[du, dv]` (cm) of the detector center from the point below the
    /// isocenter. Defaults to half the detector height in `v`, which puts
    /// row 0 under the source arc at `y = 0` (the chest wall).
    pub detector_offset: Option<[f64; 2]>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            nviews: 25,
            arc_deg: 50.0,
            source_to_isocenter: 60.0,
            source_to_detector: 62.0,
            detector: [256, 128],
            pitch: [0.034, 0.034],
            bin: [4, 4],
            strip: [118, 128],
            log_floor: LOG_FLOOR,
            detector_offset: None,
        }
    }
}

impl GeometryConfig {
    /// Scan geometry on the full-resolution detector.
    pub fn scan(&self) -> Result<ScanGeometry> {
        let det = DetectorGrid::new(self.detector[0], self.detector[1], self.pitch)?;
        ScanGeometry::limited_arc(
            self.nviews,
            self.arc_deg,
            self.source_to_isocenter,
            self.source_to_detector,
            det,
        )
        .map(|g| g.with_detector_offset(self.offset()))
    }

    pub fn offset(&self) -> [f64; 2] {
        self.detector_offset
            .unwrap_or([0.0, self.detector[1] as f64 * self.pitch[1] / 2.0])
    }

    pub fn strip(&self) -> (usize, usize) {
        (self.strip[0], self.strip[1])
    }
}

/// Low-resolution grid and the coupled-problem parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowresConfig {
    pub dims: [usize; 3],
    /// Voxel size (cm).
    pub voxel: [f64; 3],
    /// Geometric center of the volume. Defaults to `[0, ny·vy/2, 0]`, so
    /// the volume starts at the chest wall plane `y = 0`.
    pub center: Option<[f64; 3]>,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_1: f64,
    pub alpha_3: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Defaults to the voxel size.
    pub d1: Option<[f64; 3]>,
    /// Defaults to 1.5 cm in-plane and one voxel in depth.
    pub d2: Option<[f64; 3]>,
    pub dd: [f64; 2],
    pub c: f64,
    pub theta: f64,
}

impl Default for LowresConfig {
    fn default() -> Self {
        let p = CoupledProblemConfig::default();
        Self {
            dims: [72, 32, 10],
            voxel: [0.136, 0.136, 0.272],
            center: None,
            alpha_x: p.alpha_x,
            alpha_y: p.alpha_y,
            alpha_a: p.alpha_a,
            alpha_b: p.alpha_b,
            alpha_1: p.alpha_1,
            alpha_3: p.alpha_3,
            eps1: p.eps1,
            eps2: p.eps2,
            d1: None,
            d2: None,
            dd: p.dd,
            c: p.c,
            theta: p.theta,
        }
    }
}

impl LowresConfig {
    pub fn grid(&self) -> Result<VolumeGrid> {
        let center = self
            .center
            .unwrap_or([0.0, self.dims[1] as f64 * self.voxel[1] / 2.0, 0.0]);
        VolumeGrid::new(self.dims, self.voxel, center)
    }

    pub fn problem(&self) -> CoupledProblemConfig {
        let base = CoupledProblemConfig::default().with_voxel(self.voxel);
        CoupledProblemConfig {
            alpha_x: self.alpha_x,
            alpha_y: self.alpha_y,
            alpha_a: self.alpha_a,
            alpha_b: self.alpha_b,
            alpha_1: self.alpha_1,
            alpha_3: self.alpha_3,
            eps1: self.eps1,
            eps2: self.eps2,
            d1: self.d1.unwrap_or(base.d1),
            d2: self.d2.unwrap_or(base.d2),
            dd: self.dd,
            c: self.c,
            theta: self.theta,
        }
    }
}

/// What `simulate` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Counts file read by `reconstruct`; relative paths resolve against the
    /// output directory.
    pub counts: PathBuf,
    /// Grid the phantom is projected from.
    pub phantom_grid: PhantomGrid,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            counts: PathBuf::from("counts.f32"),
            phantom_grid: PhantomGrid::Highres,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomGrid {
    Lowres,
    Highres,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the photon noise.
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub lowres: LowresConfig,
    pub highres: TikhonovConfig,
    pub display: DisplayConfig,
    pub solver: SolverParams,
    pub phantom: PhantomSpec,
    pub artifacts: Vec<ArtifactSpec>,
    pub noise: NoiseSpec,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let g = &self.geometry;
        let scan = g.scan().map_err(cfg_err)?;
        let low = scan.binned(g.bin).map_err(cfg_err)?;
        if g.strip[0] >= g.strip[1] || g.strip[1] > g.detector[1] {
            return Err(Error::Config(format!(
                "strip {:?} outside the detector rows",
                g.strip
            )));
        }
        if !(g.log_floor > 0.0 && g.log_floor < 1.0) {
            return Err(Error::Config("log_floor must lie in (0, 1)".into()));
        }
        let grid = self.lowres.grid().map_err(cfg_err)?;
        low.check_volume(&grid).map_err(cfg_err)?;
        self.lowres.problem().validate()?;
        self.highres.validate()?;
        self.display.validate()?;
        self.solver.validate()?;
        self.phantom.validate().map_err(cfg_err)?;
        for a in &self.artifacts {
            a.validate().map_err(cfg_err)?;
        }
        if !(self.noise.i0 > 0.0) {
            return Err(Error::Config("noise.i0 must be > 0".into()));
        }
        Ok(())
    }

    pub fn raw_geometry(&self) -> Result<Arc<ScanGeometry>> {
        Ok(Arc::new(self.geometry.scan()?))
    }

    pub fn lowres_geometry(&self) -> Result<Arc<ScanGeometry>> {
        Ok(Arc::new(self.geometry.scan()?.binned(self.geometry.bin)?))
    }

    pub fn lowres_grid(&self) -> Result<VolumeGrid> {
        self.lowres.grid()
    }

    pub fn highres_grid(&self) -> Result<VolumeGrid> {
        self.lowres.grid()?.refined(self.highres.factors)
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("run config serializes");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
