//! Separable Gaussian blurs for volumes and detector images.
//!
//! Widths are full width at half maximum in cm. Kernels are truncated at
//! ±3σ and normalized to unit sum. Samples past an edge are mirrored about
//! the half-sample point (`-1 -> 0`, `n -> n-1`), repeated periodically for
//! kernels wider than the axis. That extension makes each axis pass a
//! symmetric, row-stochastic matrix, so the blur is self-adjoint and keeps
//! constants.

use rayon::prelude::*;

use super::{LinearOperator, Shape};
use crate::error::{Error, Result};
use crate::grid::{DetectorGrid, ImageVolume, ProjectionSet, VolumeGrid};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
const TRUNCATE_SIGMAS: f64 = 3.0;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Symmetric 1D kernel sampled on the grid, length `2 * radius + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(fwhm_cm: f64, spacing_cm: f64) -> Result<Self> {
        if !(fwhm_cm >= 0.0 && fwhm_cm.is_finite()) {
            return Err(Error::param(format!(
                "blur width must be >= 0, got {fwhm_cm}"
            )));
        }
        let sigma = fwhm_to_sigma(fwhm_cm) / spacing_cm;
        let radius = (TRUNCATE_SIGMAS * sigma).ceil() as usize;
        if radius == 0 {
            return Ok(Self { weights: vec![1.0] });
        }
        let mut weights: Vec<f64> = (0..=2 * radius)
            .map(|k| {
                let x = k as f64 - radius as f64;
                (-0.5 * x * x / (sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self { weights })
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_identity(&self) -> bool {
        self.weights.len() == 1
    }
}

/// Half-sample symmetric extension of index `m` onto `0..n`.
#[inline]
pub(crate) fn mirror(m: isize, n: usize) -> usize {
    let p = 2 * n as isize;
    let r = m.rem_euclid(p) as usize;
    if r < n {
        r
    } else {
        2 * n - 1 - r
    }
}

/// Convolve every line of a 3D array along `axis`.
fn convolve_axis(data: &mut [f64], dims: [usize; 3], axis: usize, kernel: &GaussianKernel) {
    if kernel.is_identity() || dims[axis] == 0 {
        return;
    }
    let n = dims[axis];
    let r = kernel.radius() as isize;
    let w = kernel.weights();
    let taps: Vec<usize> = (0..n as isize)
        .flat_map(|i| (-r..=r).map(move |k| mirror(i + k, n)))
        .collect();
    let width = w.len();
    let filter_line = |line: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let t = &taps[i * width..(i + 1) * width];
            *o = t.iter().zip(w).map(|(&j, &wk)| wk * line[j]).sum();
        }
    };

    let slab = dims[0] * dims[1];
    match axis {
        0 => data.par_chunks_mut(dims[0]).for_each(|row| {
            let line = row.to_vec();
            filter_line(&line, row);
        }),
        1 => data.par_chunks_mut(slab).for_each(|plane| {
            let mut line = vec![0.0; n];
            let mut out = vec![0.0; n];
            for i0 in 0..dims[0] {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = plane[i0 + dims[0] * j];
                }
                filter_line(&line, &mut out);
                for (j, &o) in out.iter().enumerate() {
                    plane[i0 + dims[0] * j] = o;
                }
            }
        }),
        _ => {
            let mut line = vec![0.0; n];
            let mut out = vec![0.0; n];
            for i01 in 0..slab {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[i01 + slab * j];
                }
                filter_line(&line, &mut out);
                for (j, &o) in out.iter().enumerate() {
                    data[i01 + slab * j] = o;
                }
            }
        }
    }
}

/// Separable Gaussian blur on a volume (`G[d]`) or on each detector image
/// (`G_det[d]`).
#[derive(Debug, Clone)]
pub struct GaussianBlur {
    shape: Shape,
    dims: [usize; 3],
    kernels: [GaussianKernel; 3],
    fwhm: [f64; 3],
}

impl GaussianBlur {
    pub fn volume(grid: VolumeGrid, fwhm: [f64; 3]) -> Result<Self> {
        Ok(Self {
            shape: Shape::Volume(grid),
            dims: grid.dims,
            kernels: [
                GaussianKernel::new(fwhm[0], grid.spacing[0])?,
                GaussianKernel::new(fwhm[1], grid.spacing[1])?,
                GaussianKernel::new(fwhm[2], grid.spacing[2])?,
            ],
            fwhm,
        })
    }

    /// 1D blur along z only.
    pub fn depth(grid: VolumeGrid, fwhm_z: f64) -> Result<Self> {
        Self::volume(grid, [0.0, 0.0, fwhm_z])
    }

    pub fn detector(nviews: usize, detector: DetectorGrid, fwhm: [f64; 2]) -> Result<Self> {
        Ok(Self {
            shape: Shape::Projections { nviews, detector },
            dims: [detector.nu, detector.nv, nviews],
            kernels: [
                GaussianKernel::new(fwhm[0], detector.pitch[0])?,
                GaussianKernel::new(fwhm[1], detector.pitch[1])?,
                GaussianKernel::new(0.0, 1.0)?,
            ],
            fwhm: [fwhm[0], fwhm[1], 0.0],
        })
    }

    pub fn is_identity(&self) -> bool {
        self.kernels.iter().all(|k| k.is_identity())
    }

    pub fn kernel(&self, axis: usize) -> &GaussianKernel {
        &self.kernels[axis]
    }

    fn run(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        for axis in 0..3 {
            convolve_axis(y, self.dims, axis, &self.kernels[axis]);
        }
    }
}

impl LinearOperator for GaussianBlur {
    fn domain(&self) -> Shape {
        self.shape
    }
    fn range(&self) -> Shape {
        self.shape
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.run(x, y)
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.run(y, x)
    }
    fn label(&self) -> String {
        match self.shape {
            Shape::Projections { .. } => format!("Gdet[{:.3},{:.3}]", self.fwhm[0], self.fwhm[1]),
            _ => format!(
                "G[{:.3},{:.3},{:.3}]",
                self.fwhm[0], self.fwhm[1], self.fwhm[2]
            ),
        }
    }
}

pub fn gaussian_blur_3d(vol: &ImageVolume, fwhm: [f64; 3]) -> Result<ImageVolume> {
    let op = GaussianBlur::volume(*vol.grid(), fwhm)?;
    ImageVolume::new(*vol.grid(), op.forward_vec(vol.data()))
}

pub fn gaussian_blur_det(p: &ProjectionSet, fwhm: [f64; 2]) -> Result<ProjectionSet> {
    let op = GaussianBlur::detector(p.nviews(), *p.detector(), fwhm)?;
    ProjectionSet::new(p.nviews(), *p.detector(), op.forward_vec(p.data()))
}
