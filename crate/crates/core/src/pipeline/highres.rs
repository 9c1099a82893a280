use std::sync::Arc;

use super::config::TikhonovConfig;
use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::grid::{ImageVolume, ProjectionSet, VolumeGrid};
use crate::operators::{
    dot, Chain, GaussianBlur, LinearOperator, OperatorRef, SqrtRampFilter, XRayTransform,
};

/// `Φ(h) = ½‖R(XGh − g)‖² + α/2 ‖Gh − h0‖²` on the high-resolution grid.
#[derive(Debug, Clone)]
pub struct TikhonovProblem {
    grid: VolumeGrid,
    data_op: Chain,
    blur: GaussianBlur,
    rg: Vec<f64>,
    h0: Vec<f64>,
    alpha: f64,
}

impl TikhonovProblem {
    pub fn new(
        g: &ProjectionSet,
        geom: Arc<ScanGeometry>,
        h0: &ImageVolume,
        cfg: &TikhonovConfig,
        cutoff: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if g.nviews() != geom.nviews() || *g.detector() != geom.detector {
            return Err(Error::shape(
                "high-resolution data does not match the scan geometry",
            ));
        }
        let grid = *h0.grid();
        let d = cfg.d.unwrap_or(grid.spacing);
        let ramp = Arc::new(SqrtRampFilter::new(geom.nviews(), geom.detector, cutoff)?);
        let blur = GaussianBlur::volume(grid, d)?;
        let xray: OperatorRef = Arc::new(XRayTransform::new(grid, geom)?);
        let data_op = Chain::new(vec![ramp.clone(), xray, Arc::new(blur.clone())])?;
        Ok(Self {
            grid,
            data_op,
            blur,
            rg: ramp.forward_vec(g.data()),
            h0: h0.data().to_vec(),
            alpha: cfg.alpha_tik,
        })
    }

    pub fn grid(&self) -> VolumeGrid {
        self.grid
    }

    fn residuals(&self, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rd = self.data_op.forward_vec(h);
        rd.iter_mut().zip(&self.rg).for_each(|(a, b)| *a -= b);
        let mut rt = self.blur.forward_vec(h);
        rt.iter_mut().zip(&self.h0).for_each(|(a, b)| *a -= b);
        (rd, rt)
    }

    fn value_from(&self, rd: &[f64], rt: &[f64]) -> f64 {
        0.5 * dot(rd, rd) + 0.5 * self.alpha * dot(rt, rt)
    }

    fn gradient_from(&self, rd: &[f64], rt: &[f64]) -> Vec<f64> {
        let mut grad = self.data_op.adjoint_vec(rd);
        let gt = self.blur.adjoint_vec(rt);
        grad.iter_mut()
            .zip(&gt)
            .for_each(|(a, b)| *a += self.alpha * b);
        grad
    }

    pub fn objective(&self, h: &[f64]) -> f64 {
        let (rd, rt) = self.residuals(h);
        self.value_from(&rd, &rt)
    }

    pub fn gradient(&self, h: &[f64]) -> Vec<f64> {
        let (rd, rt) = self.residuals(h);
        self.gradient_from(&rd, &rt)
    }

    /// `steps` steepest-descent iterations from `h0` with exact line search.
    /// Returns the iterate and the objective before and after every step.
    pub fn descend(&self, steps: usize) -> (Vec<f64>, Vec<f64>) {
        let mut h = self.h0.clone();
        let (mut rd, mut rt) = self.residuals(&h);
        let mut history = vec![self.value_from(&rd, &rt)];
        for _ in 0..steps {
            let grad = self.gradient_from(&rd, &rt);
            let gg = dot(&grad, &grad);
            let ag = self.data_op.forward_vec(&grad);
            let bg = self.blur.forward_vec(&grad);
            let curvature = dot(&ag, &ag) + self.alpha * dot(&bg, &bg);
            if gg > 0.0 && curvature > 0.0 {
                let t = gg / curvature;
                h.iter_mut().zip(&grad).for_each(|(x, g)| *x -= t * g);
                rd.iter_mut().zip(&ag).for_each(|(r, a)| *r -= t * a);
                rt.iter_mut().zip(&bg).for_each(|(r, b)| *r -= t * b);
            }
            history.push(self.value_from(&rd, &rt));
        }
        (h, history)
    }
}

#[derive(Debug, Clone)]
pub struct HighresResult {
    pub h: ImageVolume,
    /// Objective at `h0` followed by its value after each step.
    pub objective: Vec<f64>,
}

/// Refine `h0` by a fixed number of steepest-descent steps on the
/// Tikhonov-regularized least-squares objective.
pub fn reconstruct_highres(
    g: &ProjectionSet,
    geom: Arc<ScanGeometry>,
    h0: &ImageVolume,
    cfg: &TikhonovConfig,
    cutoff: f64,
) -> Result<HighresResult> {
    let problem = TikhonovProblem::new(g, geom, h0, cfg, cutoff)?;
    let (h, objective) = problem.descend(cfg.steps);
    log::info!(
        "highres: objective {:.6e} -> {:.6e} in {} steps",
        objective[0],
        objective[objective.len() - 1],
        cfg.steps
    );
    Ok(HighresResult {
        h: ImageVolume::new(problem.grid, h)?,
        objective,
    })
}
