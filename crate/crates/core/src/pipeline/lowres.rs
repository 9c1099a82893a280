use std::sync::Arc;

use super::config::{CoupledProblemConfig, SolverParams};
use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::grid::{ImageVolume, ProjectionSet, VolumeGrid};
use crate::operators::{
    Axis, Chain, FiniteDiff, GaussianBlur, Identity, LinearOperator, ObliqueDiff, OperatorRef,
    Shape, SqrtRampFilter, XRayTransform,
};
use crate::prox::SeparableFunction;
use crate::solver::{
    compute_step_sizes, solve, Block, ConvergenceReport, PrimalConstraint, ProblemSpec,
    StepSizeConfig,
};

/// Names of the blocks in the order they are assembled.
pub const BLOCK_NAMES: [&str; 13] = [
    "data1", "dx1", "dy1", "da1", "db1", "id1", "data2", "dx2", "dy2", "da2", "db2", "id2", "l1_f3",
];

/// The five DTV operators in weight order: x, y, a, b, identity.
pub fn dtv_operators(grid: VolumeGrid, theta_deg: f64) -> [OperatorRef; 5] {
    [
        Arc::new(FiniteDiff::new(grid, Axis::X)),
        Arc::new(FiniteDiff::new(grid, Axis::Y)),
        Arc::new(ObliqueDiff::new(grid, -theta_deg)),
        Arc::new(ObliqueDiff::new(grid, theta_deg)),
        Arc::new(Identity::new(Shape::Volume(grid))),
    ]
}

/// Assemble the 13-block coupled problem over columns `(f1, f2, f3)`.
///
/// `g` must already be log-processed and sampled on the detector of `geom`.
pub fn build_coupled_problem(
    g: &ProjectionSet,
    geom: Arc<ScanGeometry>,
    grid: VolumeGrid,
    cfg: &CoupledProblemConfig,
) -> Result<ProblemSpec> {
    cfg.validate()?;
    if g.nviews() != geom.nviews() || *g.detector() != geom.detector {
        return Err(Error::shape(format!(
            "data has {} views of {}x{}, geometry expects {} views of {}x{}",
            g.nviews(),
            g.detector().nu,
            g.detector().nv,
            geom.nviews(),
            geom.detector.nu,
            geom.detector.nv
        )));
    }
    let nviews = geom.nviews();
    let det = geom.detector;
    let xray: OperatorRef = Arc::new(XRayTransform::new(grid, geom)?);
    let ramp = Arc::new(SqrtRampFilter::new(nviews, det, cfg.c)?);
    let ramp_ref: OperatorRef = ramp.clone();
    let data_op = |d: [f64; 3]| -> Result<OperatorRef> {
        Ok(Arc::new(Chain::new(vec![
            ramp_ref.clone(),
            xray.clone(),
            Arc::new(GaussianBlur::volume(grid, d)?),
        ])?))
    };
    let radius = |eps: f64| eps * (g.len() as f64).sqrt();

    let center1 = ramp.forward_vec(g.data());
    let gd = GaussianBlur::detector(nviews, det, cfg.dd)?.forward_vec(g.data());
    let center2 = ramp.forward_vec(&gd);

    let dtv = dtv_operators(grid, cfg.theta);
    let weights = cfg.dtv_weights();
    let mut blocks = Vec::with_capacity(13);
    for (col, (op, center, eps)) in [
        (data_op(cfg.d1)?, center1, cfg.eps1),
        (data_op(cfg.d2)?, center2, cfg.eps2),
    ]
    .into_iter()
    .enumerate()
    {
        let names = &BLOCK_NAMES[6 * col..6 * col + 6];
        blocks.push(
            Block::new(
                names[0],
                op,
                SeparableFunction::l2_ball(center, radius(eps))?,
                col,
            )
            .with_xray(),
        );
        for (k, (d, w)) in dtv.iter().zip(weights).enumerate() {
            blocks.push(Block::new(
                names[k + 1],
                d.clone(),
                SeparableFunction::l1(w)?,
                col,
            ));
        }
    }
    blocks.push(Block::new(
        BLOCK_NAMES[12],
        dtv[4].clone(),
        SeparableFunction::l1(cfg.alpha_3)?,
        2,
    ));
    let col = Shape::Volume(grid);
    ProblemSpec::new(vec![col; 3], blocks, PrimalConstraint::Coupling)
}

#[derive(Debug, Clone)]
pub struct LowresResult {
    pub f1: ImageVolume,
    pub f2: ImageVolume,
    /// Stored as `f1 − f2`, so the coupling holds exactly.
    pub f3: ImageVolume,
    pub report: ConvergenceReport,
    pub steps: StepSizeConfig,
}

impl LowresResult {
    /// Final data RMSE of the `f1` and `f2` constraints.
    pub fn residuals(&self) -> [f64; 2] {
        let r = self.report.final_residuals();
        [r[0], r[1]]
    }
}

/// Solve the coupled problem from zero.
pub fn reconstruct_lowres(
    g: &ProjectionSet,
    geom: Arc<ScanGeometry>,
    grid: VolumeGrid,
    cfg: &CoupledProblemConfig,
    params: &SolverParams,
) -> Result<LowresResult> {
    params.validate()?;
    let mut problem = build_coupled_problem(g, geom, grid, cfg)?;
    problem.estimate_block_norms(params.power())?;
    let steps = compute_step_sizes(
        &problem,
        params.gamma,
        params.beta,
        params.rho,
        params.power(),
    )?;
    log::info!(
        "lowres: {} blocks, w = {:.4e}, tau = {:.4e}, sigma = {:.4e}",
        problem.blocks.len(),
        steps.w,
        steps.tau,
        steps.sigma[0]
    );
    let (x, report) = solve(&problem, &steps, params.stopping())?;
    let mut cols = x.into_iter();
    let f1 = ImageVolume::new(grid, cols.next().unwrap())?;
    let f2 = ImageVolume::new(grid, cols.next().unwrap())?;
    let f3 = ImageVolume::new(
        grid,
        f1.data()
            .iter()
            .zip(f2.data())
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    log::info!(
        "lowres: stopped after {} iterations ({:?}), residuals {:?}",
        report.iterations(),
        report.stop,
        report.final_residuals()
    );
    Ok(LowresResult {
        f1,
        f2,
        f3,
        report,
        steps,
    })
}
