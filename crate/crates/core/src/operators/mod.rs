//! Linear operators with matched forward and adjoint application.
//!
//! Every operator works on flat `f64` slices whose layout is described by a
//! [`Shape`]. Operators are immutable once built and can be shared across
//! threads behind an [`OperatorRef`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DetectorGrid, ImageVolume, ProjectionSet, VolumeGrid};

mod blur;
mod diff;
mod norm;
mod ramp;
mod xray;

pub use blur::{fwhm_to_sigma, gaussian_blur_3d, gaussian_blur_det, GaussianBlur, GaussianKernel};
pub use diff::{finite_diff, oblique_diff, Axis, FiniteDiff, ObliqueDiff};
pub use norm::{estimate_norm, power_iteration, NormEstimate, NORM_SEED};
pub use ramp::{sqrt_ramp_filter, SqrtRampFilter};
pub use xray::{xray_adjoint, xray_forward, XRayTransform};

/// Layout of an operator's input or output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Volume(VolumeGrid),
    Projections {
        nviews: usize,
        detector: DetectorGrid,
    },
    Vector(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Volume(g) => g.len(),
            Shape::Projections { nviews, detector } => nviews * detector.pixels(),
            Shape::Vector(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Volume(g) => write!(f, "volume {}x{}x{}", g.dims[0], g.dims[1], g.dims[2]),
            Shape::Projections { nviews, detector } => {
                write!(f, "projections {}x{}x{}", nviews, detector.nu, detector.nv)
            }
            Shape::Vector(n) => write!(f, "vector {n}"),
        }
    }
}

/// A matrix applied implicitly.
///
/// Implementations must satisfy `<A x, y> = <x, A^T y>` to rounding error.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn domain(&self) -> Shape;
    fn range(&self) -> Shape;

    /// `y = A x`. `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `x = A^T y`. `x` is overwritten.
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]);

    fn label(&self) -> String;

    fn forward_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.range().len()];
        self.apply(x, &mut y);
        y
    }

    fn adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.domain().len()];
        self.apply_adjoint(y, &mut x);
        x
    }
}

pub type OperatorRef = Arc<dyn LinearOperator>;

/// Wrap a flat buffer produced by an operator back into its typed container.
pub fn volume_from(shape: Shape, data: Vec<f64>) -> Result<ImageVolume> {
    match shape {
        Shape::Volume(g) => ImageVolume::new(g, data),
        other => Err(Error::shape(format!(
            "expected a volume, operator produces {other}"
        ))),
    }
}

pub fn projections_from(shape: Shape, data: Vec<f64>) -> Result<ProjectionSet> {
    match shape {
        Shape::Projections { nviews, detector } => ProjectionSet::new(nviews, detector, data),
        other => Err(Error::shape(format!(
            "expected projections, operator produces {other}"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct Identity {
    shape: Shape,
}

impl Identity {
    pub fn new(shape: Shape) -> Self {
        Self { shape }
    }
}

impl LinearOperator for Identity {
    fn domain(&self) -> Shape {
        self.shape
    }
    fn range(&self) -> Shape {
        self.shape
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
    }
    fn label(&self) -> String {
        "I".into()
    }
}

/// `scale * A`.
#[derive(Debug, Clone)]
pub struct Scaled {
    inner: OperatorRef,
    scale: f64,
}

impl Scaled {
    pub fn new(inner: OperatorRef, scale: f64) -> Self {
        Self { inner, scale }
    }
}

impl LinearOperator for Scaled {
    fn domain(&self) -> Shape {
        self.inner.domain()
    }
    fn range(&self) -> Shape {
        self.inner.range()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        y.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.inner.apply_adjoint(y, x);
        x.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn label(&self) -> String {
        format!("{}*{}", self.scale, self.inner.label())
    }
}

/// Composition `A_0 ∘ A_1 ∘ … ∘ A_n`; the last operator is applied first.
#[derive(Debug, Clone)]
pub struct Chain {
    ops: Vec<OperatorRef>,
}

impl Chain {
    pub fn new(ops: Vec<OperatorRef>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::param("empty operator chain"));
        }
        for pair in ops.windows(2) {
            if pair[0].domain() != pair[1].range() {
                return Err(Error::shape(format!(
                    "cannot compose {} (domain {}) with {} (range {})",
                    pair[0].label(),
                    pair[0].domain(),
                    pair[1].label(),
                    pair[1].range()
                )));
            }
        }
        Ok(Self { ops })
    }

    pub fn operators(&self) -> &[OperatorRef] {
        &self.ops
    }
}

impl LinearOperator for Chain {
    fn domain(&self) -> Shape {
        self.ops.last().unwrap().domain()
    }
    fn range(&self) -> Shape {
        self.ops[0].range()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut cur = x.to_vec();
        for op in self.ops.iter().skip(1).rev() {
            cur = op.forward_vec(&cur);
        }
        self.ops[0].apply(&cur, y);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let n = self.ops.len();
        let mut cur = y.to_vec();
        for op in &self.ops[..n - 1] {
            cur = op.adjoint_vec(&cur);
        }
        self.ops[n - 1].apply_adjoint(&cur, x);
    }
    fn label(&self) -> String {
        self.ops
            .iter()
            .map(|o| o.label())
            .collect::<Vec<_>>()
            .join("∘")
    }
}

/// Vertical stack `[A_0; A_1; …]` of operators sharing a domain.
#[derive(Debug, Clone)]
pub struct Stack {
    ops: Vec<OperatorRef>,
    total: usize,
}

impl Stack {
    pub fn new(ops: Vec<OperatorRef>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::param("empty operator stack"))?
            .domain();
        if ops.iter().any(|o| o.domain() != first) {
            return Err(Error::shape("stacked operators must share a domain"));
        }
        let total = ops.iter().map(|o| o.range().len()).sum();
        Ok(Self { ops, total })
    }
}

impl LinearOperator for Stack {
    fn domain(&self) -> Shape {
        self.ops[0].domain()
    }
    fn range(&self) -> Shape {
        Shape::Vector(self.total)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut off = 0;
        for op in &self.ops {
            let m = op.range().len();
            op.apply(x, &mut y[off..off + m]);
            off += m;
        }
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; x.len()];
        let mut off = 0;
        for op in &self.ops {
            let m = op.range().len();
            op.apply_adjoint(&y[off..off + m], &mut tmp);
            x.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            off += m;
        }
    }
    fn label(&self) -> String {
        format!(
            "[{}]",
            self.ops
                .iter()
                .map(|o| o.label())
                .collect::<Vec<_>>()
                .join("; ")
        )
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries",
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

impl LinearOperator for DenseMatrix {
    fn domain(&self) -> Shape {
        Shape::Vector(self.cols)
    }
    fn range(&self) -> Shape {
        Shape::Vector(self.rows)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            x.iter_mut().zip(row).for_each(|(a, b)| *a += b * yr);
        }
    }
    fn label(&self) -> String {
        format!("M{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone)]
pub struct Diagonal {
    diag: Vec<f64>,
}

impl Diagonal {
    pub fn new(diag: Vec<f64>) -> Self {
        Self { diag }
    }
}

impl LinearOperator for Diagonal {
    fn domain(&self) -> Shape {
        Shape::Vector(self.diag.len())
    }
    fn range(&self) -> Shape {
        Shape::Vector(self.diag.len())
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((o, a), d) in y.iter_mut().zip(x).zip(&self.diag) {
            *o = a * d;
        }
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.apply(y, x)
    }
    fn label(&self) -> String {
        "diag".into()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative mismatch of the dot-product identity `<A x, y>` vs `<x, A^T y>`.
pub fn adjoint_mismatch(op: &dyn LinearOperator, x: &[f64], y: &[f64]) -> f64 {
    let ax = op.forward_vec(x);
    let aty = op.adjoint_vec(y);
    let lhs = dot(&ax, y);
    let rhs = dot(x, &aty);
    let scale = (norm2(&ax) * norm2(y))
        .max(norm2(x) * norm2(&aty))
        .max(f64::MIN_POSITIVE);
    (lhs - rhs).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rejects_incompatible_shapes() {
        let a: OperatorRef = Arc::new(Identity::new(Shape::Vector(3)));
        let b: OperatorRef = Arc::new(Identity::new(Shape::Vector(4)));
        assert!(Chain::new(vec![a, b]).is_err());
    }

    #[test]
    fn chain_adjoint_reverses_order() {
        let a: OperatorRef =
            Arc::new(DenseMatrix::new(2, 3, vec![1.0, 2.0, 0.5, -1.0, 0.0, 3.0]).unwrap());
        let b: OperatorRef =
            Arc::new(DenseMatrix::new(3, 2, vec![0.2, 1.0, -2.0, 0.1, 4.0, 1.5]).unwrap());
        let c = Chain::new(vec![a.clone(), b.clone()]).unwrap();
        let x = [0.3, -0.7];
        let y = [1.1, 0.4];
        assert_eq!(c.forward_vec(&x), a.forward_vec(&b.forward_vec(&x)));
        assert_eq!(c.adjoint_vec(&y), b.adjoint_vec(&a.adjoint_vec(&y)));
        assert!(adjoint_mismatch(&c, &x, &y) < 1e-14);
    }

    #[test]
    fn stack_adjoint_sums() {
        let a: OperatorRef = Arc::new(Diagonal::new(vec![1.0, 2.0]));
        let b: OperatorRef = Arc::new(Identity::new(Shape::Vector(2)));
        let s = Stack::new(vec![a, b]).unwrap();
        assert_eq!(s.forward_vec(&[1.0, 1.0]), vec![1.0, 2.0, 1.0, 1.0]);
        assert_eq!(s.adjoint_vec(&[1.0, 1.0, 1.0, 1.0]), vec![2.0, 3.0]);
    }
}
