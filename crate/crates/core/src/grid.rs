//! Voxel and detector grids, and the dense arrays that live on them.
//!
//! Volumes are stored x-fastest, then y, then z. Projection sets are stored
//! u-fastest, then v, then view. The physical origin of a volume is the
//! position of its geometric center, so the isocenter sits at the center of a
//! volume with origin `[0, 0, 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular voxel grid with physical spacing in cm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl VolumeGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::param(format!(
                "volume dims must be nonzero, got {dims:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::param(format!(
                "voxel spacing must be strictly positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::param("volume origin must be finite"));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// Grid centered on the isocenter.
    pub fn centered(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    /// Physical coordinate of the voxel center along one axis.
    #[inline]
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64 + 0.5 - self.dims[axis] as f64 / 2.0) * self.spacing[axis]
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.axis_center(0, ix),
            self.axis_center(1, iy),
            self.axis_center(2, iz),
        ]
    }

    /// Physical size of the grid along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    /// Lower and upper corners of the bounding box.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let e = self.extent();
        let lo = [
            self.origin[0] - e[0] / 2.0,
            self.origin[1] - e[1] / 2.0,
            self.origin[2] - e[2] / 2.0,
        ];
        let hi = [
            self.origin[0] + e[0] / 2.0,
            self.origin[1] + e[1] / 2.0,
            self.origin[2] + e[2] / 2.0,
        ];
        (lo, hi)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Finer grid covering the same physical extent.
    pub fn refined(&self, factors: [usize; 3]) -> Result<Self> {
        check_factors(&factors)?;
        Self::new(
            [
                self.dims[0] * factors[0],
                self.dims[1] * factors[1],
                self.dims[2] * factors[2],
            ],
            [
                self.spacing[0] / factors[0] as f64,
                self.spacing[1] / factors[1] as f64,
                self.spacing[2] / factors[2] as f64,
            ],
            self.origin,
        )
    }

    /// Coarser grid covering the same physical extent.
    pub fn coarsened(&self, factors: [usize; 3]) -> Result<Self> {
        check_factors(&factors)?;
        for axis in 0..3 {
            if self.dims[axis] % factors[axis] != 0 {
                return Err(Error::shape(format!(
                    "dimension {} along axis {axis} is not divisible by {}",
                    self.dims[axis], factors[axis]
                )));
            }
        }
        Self::new(
            [
                self.dims[0] / factors[0],
                self.dims[1] / factors[1],
                self.dims[2] / factors[2],
            ],
            [
                self.spacing[0] * factors[0] as f64,
                self.spacing[1] * factors[1] as f64,
                self.spacing[2] * factors[2] as f64,
            ],
            self.origin,
        )
    }
}

fn check_factors(factors: &[usize]) -> Result<()> {
    if factors.iter().any(|&f| f == 0) {
        return Err(Error::param(format!(
            "resampling factors must be >= 1, got {factors:?}"
        )));
    }
    Ok(())
}

/// Flat detector pixel layout. Pitch is in cm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorGrid {
    pub nu: usize,
    pub nv: usize,
    pub pitch: [f64; 2],
}

impl DetectorGrid {
    pub fn new(nu: usize, nv: usize, pitch: [f64; 2]) -> Result<Self> {
        if nu == 0 || nv == 0 {
            return Err(Error::param("detector dims must be nonzero"));
        }
        if pitch.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::param(format!(
                "detector pitch must be positive, got {pitch:?}"
            )));
        }
        Ok(Self { nu, nv, pitch })
    }

    pub fn pixels(&self) -> usize {
        self.nu * self.nv
    }

    pub fn binned(&self, factors: [usize; 2]) -> Result<Self> {
        check_factors(&factors)?;
        if self.nu % factors[0] != 0 || self.nv % factors[1] != 0 {
            return Err(Error::shape(format!(
                "detector {}x{} is not divisible by {factors:?}",
                self.nu, self.nv
            )));
        }
        Self::new(
            self.nu / factors[0],
            self.nv / factors[1],
            [
                self.pitch[0] * factors[0] as f64,
                self.pitch[1] * factors[1] as f64,
            ],
        )
    }
}

/// 3D attenuation map in cm⁻¹.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVolume {
    grid: VolumeGrid,
    data: Vec<f64>,
}

impl ImageVolume {
    pub fn new(grid: VolumeGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::shape(format!(
                "volume data has {} values, grid {:?} needs {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("volume contains non-finite values"));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: VolumeGrid) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: VolumeGrid, value: f64) -> Self {
        Self {
            data: vec![value; grid.len()],
            grid,
        }
    }

    /// Evaluate `f` at every voxel center.
    pub fn from_fn(grid: VolumeGrid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for iz in 0..grid.dims[2] {
            for iy in 0..grid.dims[1] {
                for ix in 0..grid.dims[0] {
                    data.push(f(grid.voxel_center(ix, iy, iz)));
                }
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.data[self.grid.index(ix, iy, iz)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, value: f64) {
        let i = self.grid.index(ix, iy, iz);
        self.data[i] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Stack of detector images, one per view.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSet {
    nviews: usize,
    detector: DetectorGrid,
    data: Vec<f64>,
}

impl ProjectionSet {
    pub fn new(nviews: usize, detector: DetectorGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != nviews * detector.pixels() {
            return Err(Error::shape(format!(
                "projection data has {} values, expected {}x{}x{}",
                data.len(),
                nviews,
                detector.nu,
                detector.nv
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("projection data contains non-finite values"));
        }
        Ok(Self {
            nviews,
            detector,
            data,
        })
    }

    pub fn zeros(nviews: usize, detector: DetectorGrid) -> Self {
        Self::filled(nviews, detector, 0.0)
    }

    pub fn filled(nviews: usize, detector: DetectorGrid, value: f64) -> Self {
        Self {
            nviews,
            data: vec![value; nviews * detector.pixels()],
            detector,
        }
    }

    pub fn nviews(&self) -> usize {
        self.nviews
    }

    pub fn detector(&self) -> &DetectorGrid {
        &self.detector
    }

    /// Number of scalar samples, `nviews * nu * nv`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, view: usize, iu: usize, iv: usize) -> usize {
        iu + self.detector.nu * (iv + self.detector.nv * view)
    }

    pub fn get(&self, view: usize, iu: usize, iv: usize) -> f64 {
        self.data[self.index(view, iu, iv)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn view(&self, view: usize) -> &[f64] {
        let n = self.detector.pixels();
        &self.data[view * n..(view + 1) * n]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Direction of a volume resampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMode {
    /// Trilinear interpolation with clamped boundary.
    Up,
    /// Block replication; the exact right inverse of `Down`.
    UpNearest,
    /// Block average.
    Down,
}

/// Change the voxel grid resolution while keeping the physical extent.
pub fn resample_volume(
    vol: &ImageVolume,
    factors: [usize; 3],
    mode: ResampleMode,
) -> Result<ImageVolume> {
    match mode {
        ResampleMode::Down => downsample_volume(vol, factors),
        ResampleMode::Up => upsample_trilinear(vol, factors),
        ResampleMode::UpNearest => upsample_nearest(vol, factors),
    }
}

fn downsample_volume(vol: &ImageVolume, f: [usize; 3]) -> Result<ImageVolume> {
    let out_grid = vol.grid.coarsened(f)?;
    let [nx, ny, _] = vol.grid.dims;
    let [ox, oy, oz] = out_grid.dims;
    let norm = 1.0 / (f[0] * f[1] * f[2]) as f64;
    let mut out = vec![0.0; out_grid.len()];
    for iz in 0..oz {
        for iy in 0..oy {
            for ix in 0..ox {
                let mut acc = 0.0;
                for kz in 0..f[2] {
                    for ky in 0..f[1] {
                        let row = (ix * f[0]) + nx * ((iy * f[1] + ky) + ny * (iz * f[2] + kz));
                        acc += vol.data[row..row + f[0]].iter().sum::<f64>();
                    }
                }
                out[out_grid.index(ix, iy, iz)] = acc * norm;
            }
        }
    }
    Ok(ImageVolume {
        grid: out_grid,
        data: out,
    })
}

fn upsample_nearest(vol: &ImageVolume, f: [usize; 3]) -> Result<ImageVolume> {
    let out_grid = vol.grid.refined(f)?;
    let [nx, ny, nz] = out_grid.dims;
    let mut out = Vec::with_capacity(out_grid.len());
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(vol.get(ix / f[0], iy / f[1], iz / f[2]));
            }
        }
    }
    Ok(ImageVolume {
        grid: out_grid,
        data: out,
    })
}

/// Linear interpolation taps for one axis: lower index, upper index, upper weight.
fn linear_taps(n_in: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n_in * factor)
        .map(|i| {
            let q = (i as f64 + 0.5) / factor as f64 - 0.5;
            let q = q.clamp(0.0, (n_in - 1) as f64);
            let lo = q.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, q - lo as f64)
        })
        .collect()
}

fn upsample_trilinear(vol: &ImageVolume, f: [usize; 3]) -> Result<ImageVolume> {
    let out_grid = vol.grid.refined(f)?;
    let tx = linear_taps(vol.grid.dims[0], f[0]);
    let ty = linear_taps(vol.grid.dims[1], f[1]);
    let tz = linear_taps(vol.grid.dims[2], f[2]);
    let mut out = Vec::with_capacity(out_grid.len());
    for &(z0, z1, wz) in &tz {
        for &(y0, y1, wy) in &ty {
            for &(x0, x1, wx) in &tx {
                let c00 = lerp(vol.get(x0, y0, z0), vol.get(x1, y0, z0), wx);
                let c10 = lerp(vol.get(x0, y1, z0), vol.get(x1, y1, z0), wx);
                let c01 = lerp(vol.get(x0, y0, z1), vol.get(x1, y0, z1), wx);
                let c11 = lerp(vol.get(x0, y1, z1), vol.get(x1, y1, z1), wx);
                out.push(lerp(lerp(c00, c10, wy), lerp(c01, c11, wy), wz));
            }
        }
    }
    Ok(ImageVolume {
        grid: out_grid,
        data: out,
    })
}

#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + (b - a) * w
    }
}

/// Block-mean binning of every view; pixel pitch grows by the factors.
pub fn downsample_projections(p: &ProjectionSet, factors: [usize; 2]) -> Result<ProjectionSet> {
    let det = p.detector.binned(factors)?;
    let [fu, fv] = factors;
    let norm = 1.0 / (fu * fv) as f64;
    let mut out = vec![0.0; p.nviews * det.pixels()];
    for view in 0..p.nviews {
        for iv in 0..det.nv {
            for iu in 0..det.nu {
                let mut acc = 0.0;
                for kv in 0..fv {
                    let start = p.index(view, iu * fu, iv * fv + kv);
                    acc += p.data[start..start + fu].iter().sum::<f64>();
                }
                out[iu + det.nu * (iv + det.nv * view)] = acc * norm;
            }
        }
    }
    Ok(ProjectionSet {
        nviews: p.nviews,
        detector: det,
        data: out,
    })
}
