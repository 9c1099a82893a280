//! Forward finite differences and oblique directional derivatives.

use serde::{Deserialize, Serialize};

use super::{LinearOperator, Shape};
use crate::error::Result;
use crate::grid::{ImageVolume, VolumeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// `(f[i+1] - f[i]) / h`, zero at the last sample of the axis.
#[derive(Debug, Clone)]
pub struct FiniteDiff {
    grid: VolumeGrid,
    axis: Axis,
}

impl FiniteDiff {
    pub fn new(grid: VolumeGrid, axis: Axis) -> Self {
        Self { grid, axis }
    }

    fn stride_and_len(&self) -> (usize, usize) {
        let d = self.grid.dims;
        match self.axis {
            Axis::X => (1, d[0]),
            Axis::Y => (d[0], d[1]),
            Axis::Z => (d[0] * d[1], d[2]),
        }
    }

    /// Position of element `idx` along the differenced axis.
    #[inline]
    fn coord(&self, idx: usize, stride: usize, n: usize) -> usize {
        (idx / stride) % n
    }

    pub(crate) fn accumulate(&self, x: &[f64], y: &mut [f64], scale: f64) {
        let (stride, n) = self.stride_and_len();
        let inv_h = scale / self.grid.spacing[self.axis.index()];
        for (i, out) in y.iter_mut().enumerate() {
            if self.coord(i, stride, n) + 1 < n {
                *out += (x[i + stride] - x[i]) * inv_h;
            }
        }
    }

    pub(crate) fn accumulate_adjoint(&self, y: &[f64], x: &mut [f64], scale: f64) {
        let (stride, n) = self.stride_and_len();
        let inv_h = scale / self.grid.spacing[self.axis.index()];
        for (i, out) in x.iter_mut().enumerate() {
            let c = self.coord(i, stride, n);
            let mut acc = 0.0;
            if c >= 1 {
                acc += y[i - stride];
            }
            if c + 1 < n {
                acc -= y[i];
            }
            *out += acc * inv_h;
        }
    }
}

impl LinearOperator for FiniteDiff {
    fn domain(&self) -> Shape {
        Shape::Volume(self.grid)
    }
    fn range(&self) -> Shape {
        Shape::Volume(self.grid)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate(x, y, 1.0);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate_adjoint(y, x, 1.0);
    }
    fn label(&self) -> String {
        format!("D{:?}", self.axis).to_lowercase()
    }
}

/// `cos θ ∂x + sin θ ∂z`: a derivative along a direction in the xz-plane.
#[derive(Debug, Clone)]
pub struct ObliqueDiff {
    dx: FiniteDiff,
    dz: FiniteDiff,
    theta_deg: f64,
}

impl ObliqueDiff {
    pub fn new(grid: VolumeGrid, theta_deg: f64) -> Self {
        Self {
            dx: FiniteDiff::new(grid, Axis::X),
            dz: FiniteDiff::new(grid, Axis::Z),
            theta_deg,
        }
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }
}

impl LinearOperator for ObliqueDiff {
    fn domain(&self) -> Shape {
        self.dx.domain()
    }
    fn range(&self) -> Shape {
        self.dx.range()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t = self.theta_deg.to_radians();
        y.iter_mut().for_each(|v| *v = 0.0);
        self.dx.accumulate(x, y, t.cos());
        self.dz.accumulate(x, y, t.sin());
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let t = self.theta_deg.to_radians();
        x.iter_mut().for_each(|v| *v = 0.0);
        self.dx.accumulate_adjoint(y, x, t.cos());
        self.dz.accumulate_adjoint(y, x, t.sin());
    }
    fn label(&self) -> String {
        format!("D[{}°]", self.theta_deg)
    }
}

pub fn finite_diff(vol: &ImageVolume, axis: Axis) -> Result<ImageVolume> {
    let op = FiniteDiff::new(*vol.grid(), axis);
    ImageVolume::new(*vol.grid(), op.forward_vec(vol.data()))
}

pub fn oblique_diff(vol: &ImageVolume, theta_deg: f64) -> Result<ImageVolume> {
    let op = ObliqueDiff::new(*vol.grid(), theta_deg);
    ImageVolume::new(*vol.grid(), op.forward_vec(vol.data()))
}
