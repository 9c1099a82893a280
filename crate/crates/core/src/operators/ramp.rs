//! Square root of the ramp filter, applied along detector rows (`u`).
//!
//! Each row is zero-padded to `2 * next_pow2(nu)` samples, filtered in the
//! frequency domain with `sqrt(|ν| / ν_Nyquist)` below the cutoff and zero
//! above it, and cropped back to `nu`. The response is real and even, so the
//! padded circulant is symmetric and so is its crop: the filter is its own
//! adjoint.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{LinearOperator, Shape};
use crate::error::{Error, Result};
use crate::grid::{DetectorGrid, ProjectionSet};

#[derive(Clone)]
pub struct SqrtRampFilter {
    nviews: usize,
    detector: DetectorGrid,
    cutoff: f64,
    response: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SqrtRampFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqrtRampFilter")
            .field("nviews", &self.nviews)
            .field("detector", &self.detector)
            .field("cutoff", &self.cutoff)
            .field("padded_len", &self.response.len())
            .finish()
    }
}

impl SqrtRampFilter {
    pub fn new(nviews: usize, detector: DetectorGrid, cutoff: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(Error::param(format!(
                "ramp cutoff must lie in [0, 1], got {cutoff}"
            )));
        }
        let len = 2 * detector.nu.next_power_of_two();
        let response = Self::response_for(len, cutoff);
        let mut planner = FftPlanner::new();
        Ok(Self {
            nviews,
            detector,
            cutoff,
            response,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        })
    }

    /// Frequency response on the `len`-point DFT grid.
    pub fn response_for(len: usize, cutoff: f64) -> Vec<f64> {
        (0..len)
            .map(|k| {
                let rel = 2.0 * k.min(len - k) as f64 / len as f64;
                if rel <= cutoff + 1e-12 {
                    rel.sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn padded_len(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Circular filtering of one zero-padded row, before cropping.
    pub fn filter_padded_row(&self, row: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded_len()];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.scratch_len()];
        self.filter_into(row, &mut buf, &mut scratch);
        buf.iter().map(|c| c.re).collect()
    }

    fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    fn filter_into(&self, row: &[f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let len = buf.len();
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(if i < row.len() { row[i] } else { 0.0 }, 0.0);
        }
        self.fwd.process_with_scratch(buf, scratch);
        let scale = 1.0 / len as f64;
        for (b, &h) in buf.iter_mut().zip(&self.response) {
            *b *= h * scale;
        }
        self.inv.process_with_scratch(buf, scratch);
    }

    fn run(&self, x: &[f64], y: &mut [f64]) {
        let nu = self.detector.nu;
        let len = self.padded_len();
        let scratch_len = self.scratch_len();
        y.par_chunks_mut(nu).zip(x.par_chunks(nu)).for_each_init(
            || {
                (
                    vec![Complex::new(0.0, 0.0); len],
                    vec![Complex::new(0.0, 0.0); scratch_len],
                )
            },
            |(buf, scratch), (out, row)| {
                self.filter_into(row, buf, scratch);
                for (o, b) in out.iter_mut().zip(buf.iter()) {
                    *o = b.re;
                }
            },
        );
    }
}

impl LinearOperator for SqrtRampFilter {
    fn domain(&self) -> Shape {
        Shape::Projections {
            nviews: self.nviews,
            detector: self.detector,
        }
    }
    fn range(&self) -> Shape {
        self.domain()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.run(x, y)
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.run(y, x)
    }
    fn label(&self) -> String {
        format!("R[{}]", self.cutoff)
    }
}

pub fn sqrt_ramp_filter(p: &ProjectionSet, cutoff: f64) -> Result<ProjectionSet> {
    let op = SqrtRampFilter::new(p.nviews(), *p.detector(), cutoff)?;
    ProjectionSet::new(p.nviews(), *p.detector(), op.forward_vec(p.data()))
}
