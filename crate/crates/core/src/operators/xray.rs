//! Joseph-style ray-driven cone-beam projector and its exact adjoint.
//!
//! Each ray runs from the source to a detector pixel center. It is sampled
//! once per voxel plane along its driving axis (the axis with the most planes
//! crossed per unit length), with bilinear interpolation inside the plane and
//! zero outside the grid. The back-projector scatters the same weights, so
//! the pair is a matched transpose.

use std::sync::Arc;

use rayon::prelude::*;

use super::{LinearOperator, Shape};
use crate::error::{Error, Result};
use crate::geometry::{dot, sub, ScanGeometry, Vec3};
use crate::grid::{ImageVolume, ProjectionSet, VolumeGrid};

/// Views back-projected into one partial volume before the ordered reduction.
const VIEW_CHUNK: usize = 4;

#[derive(Debug, Clone)]
pub struct XRayTransform {
    grid: VolumeGrid,
    geom: Arc<ScanGeometry>,
}

impl XRayTransform {
    pub fn new(grid: VolumeGrid, geom: Arc<ScanGeometry>) -> Result<Self> {
        geom.check_volume(&grid)?;
        Ok(Self { grid, geom })
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ScanGeometry {
        &self.geom
    }

    /// Calls `visit(voxel_index, weight)` for every voxel the ray samples.
    /// Weights carry the path length in cm.
    #[inline]
    fn trace(&self, src: Vec3, pix: Vec3, mut visit: impl FnMut(usize, f64)) {
        let g = &self.grid;
        let n = g.dims;
        let s = g.spacing;
        let d = sub(pix, src);
        let len = dot(d, d).sqrt();

        let mut a = 0;
        let mut best = 0.0;
        for axis in 0..3 {
            let crossing = d[axis].abs() / s[axis];
            if crossing > best {
                best = crossing;
                a = axis;
            }
        }
        if best == 0.0 {
            return;
        }
        let (b, c) = match a {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let strides = [1, n[0], n[0] * n[1]];
        let step = s[a] * len / d[a].abs();

        // continuous voxel index of physical coordinate p along an axis
        let cont =
            |axis: usize, p: f64| (p - g.origin[axis]) / s[axis] + n[axis] as f64 / 2.0 - 0.5;
        let nb = n[b] as f64;
        let nc = n[c] as f64;

        for k in 0..n[a] {
            let t = (g.axis_center(a, k) - src[a]) / d[a];
            let fb = cont(b, src[b] + t * d[b]);
            let fc = cont(c, src[c] + t * d[c]);
            if !(fb > -1.0 && fb < nb && fc > -1.0 && fc < nc) {
                continue;
            }
            let ib = fb.floor();
            let ic = fc.floor();
            let wb = fb - ib;
            let wc = fc - ic;
            let ib = ib as isize;
            let ic = ic as isize;
            let base = k * strides[a];
            for (jb, wjb) in [(ib, 1.0 - wb), (ib + 1, wb)] {
                if jb < 0 || jb >= n[b] as isize || wjb == 0.0 {
                    continue;
                }
                for (jc, wjc) in [(ic, 1.0 - wc), (ic + 1, wc)] {
                    if jc < 0 || jc >= n[c] as isize || wjc == 0.0 {
                        continue;
                    }
                    let idx = base + jb as usize * strides[b] + jc as usize * strides[c];
                    visit(idx, step * wjb * wjc);
                }
            }
        }
    }

    fn project_view(&self, view: usize, x: &[f64], out: &mut [f64]) {
        let det = self.geom.detector;
        let src = self.geom.views[view].source;
        for iv in 0..det.nv {
            for iu in 0..det.nu {
                let pix = self.geom.pixel_center(view, iu, iv);
                let mut acc = 0.0;
                self.trace(src, pix, |i, w| acc += w * x[i]);
                out[iu + det.nu * iv] = acc;
            }
        }
    }

    fn backproject_view(&self, view: usize, y: &[f64], out: &mut [f64]) {
        let det = self.geom.detector;
        let src = self.geom.views[view].source;
        for iv in 0..det.nv {
            for iu in 0..det.nu {
                let val = y[iu + det.nu * iv];
                if val == 0.0 {
                    continue;
                }
                let pix = self.geom.pixel_center(view, iu, iv);
                self.trace(src, pix, |i, w| out[i] += w * val);
            }
        }
    }
}

impl LinearOperator for XRayTransform {
    fn domain(&self) -> Shape {
        Shape::Volume(self.grid)
    }

    fn range(&self) -> Shape {
        Shape::Projections {
            nviews: self.geom.nviews(),
            detector: self.geom.detector,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let npix = self.geom.detector.pixels();
        y.par_chunks_mut(npix)
            .enumerate()
            .for_each(|(view, out)| self.project_view(view, x, out));
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let npix = self.geom.detector.pixels();
        let nviews = self.geom.nviews();
        let chunks: Vec<usize> = (0..nviews).step_by(VIEW_CHUNK).collect();
        let partials: Vec<Vec<f64>> = chunks
            .par_iter()
            .map(|&start| {
                let mut part = vec![0.0; self.grid.len()];
                for view in start..(start + VIEW_CHUNK).min(nviews) {
                    self.backproject_view(view, &y[view * npix..(view + 1) * npix], &mut part);
                }
                part
            })
            .collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        for part in &partials {
            x.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
    }

    fn label(&self) -> String {
        "X".into()
    }
}

/// Line integrals of `vol` for every view and detector pixel.
pub fn xray_forward(vol: &ImageVolume, geom: &ScanGeometry) -> Result<ProjectionSet> {
    let op = XRayTransform::new(*vol.grid(), Arc::new(geom.clone()))?;
    ProjectionSet::new(geom.nviews(), geom.detector, op.forward_vec(vol.data()))
}

/// Matched back-projection of `p` onto `grid`.
pub fn xray_adjoint(
    p: &ProjectionSet,
    geom: &ScanGeometry,
    grid: &VolumeGrid,
) -> Result<ImageVolume> {
    if p.nviews() != geom.nviews() || *p.detector() != geom.detector {
        return Err(Error::shape(format!(
            "projections {}x{}x{} do not match geometry {}x{}x{}",
            p.nviews(),
            p.detector().nu,
            p.detector().nv,
            geom.nviews(),
            geom.detector.nu,
            geom.detector.nv
        )));
    }
    let op = XRayTransform::new(*grid, Arc::new(geom.clone()))?;
    ImageVolume::new(*grid, op.adjoint_vec(p.data()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DetectorGrid;
    use crate::operators::adjoint_mismatch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_setup(nviews: usize) -> (VolumeGrid, ScanGeometry) {
        let grid = VolumeGrid::centered([8, 8, 8], [0.2, 0.2, 0.2]).unwrap();
        let det = DetectorGrid::new(16, 12, [0.15, 0.15]).unwrap();
        let geom = ScanGeometry::limited_arc(nviews, 50.0, 30.0, 33.0, det).unwrap();
        (grid, geom)
    }

    #[test]
    fn zero_in_zero_out() {
        let (grid, geom) = small_setup(5);
        let p = xray_forward(&ImageVolume::zeros(grid), &geom).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
        let b = xray_adjoint(&ProjectionSet::zeros(5, geom.detector), &geom, &grid).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn central_ray_through_single_voxel() {
        let w = 0.34;
        let grid = VolumeGrid::centered([3, 3, 3], [w, w, w]).unwrap();
        let det = DetectorGrid::new(5, 5, [0.1, 0.1]).unwrap();
        let geom = ScanGeometry::limited_arc(1, 0.0, 50.0, 55.0, det).unwrap();
        let mut vol = ImageVolume::zeros(grid);
        vol.set(1, 1, 1, 1.0);
        let p = xray_forward(&vol, &geom).unwrap();
        // the analytic chord of a ray through the box center along z is w
        assert!((p.get(0, 2, 2) - w).abs() < 1e-6);
    }

    #[test]
    fn dot_product_identity() {
        let (grid, geom) = small_setup(7);
        let op = XRayTransform::new(grid, Arc::new(geom)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..op.domain().len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let y: Vec<f64> = (0..op.range().len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        assert!(adjoint_mismatch(&op, &x, &y) < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (grid, geom) = small_setup(3);
        let wrong = ProjectionSet::zeros(2, geom.detector);
        assert!(matches!(
            xray_adjoint(&wrong, &geom, &grid),
            Err(Error::Shape(_))
        ));
    }
}
