//! Built-in verification suites: adjoint identities, proximal oracles, the
//! step-size condition and noiseless recovery.
//!
//! The suites return structured results; `dbt-recon verify` prints them and
//! exits nonzero when any check fails.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::geometry::ScanGeometry;
use crate::grid::{DetectorGrid, VolumeGrid};
use crate::operators::{
    adjoint_mismatch, Axis, Chain, DenseMatrix, Diagonal, FiniteDiff, GaussianBlur, Identity,
    LinearOperator, ObliqueDiff, OperatorRef, Scaled, Shape, SqrtRampFilter, Stack, XRayTransform,
};
use crate::pipeline::{
    build_coupled_problem, reconstruct_lowres, CoupledProblemConfig, SolverParams,
};
use crate::prox::{project_coupling_slices, project_l2_ball, prox_l1, SeparableFunction};
use crate::sim::{inverse_crime_dataset, voxelize};
use crate::solver::{compute_step_sizes, step_condition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: String, start: Instant) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// One line per check: `PASS|FAIL <tab> name <tab> seconds <tab> detail`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.2}s\t{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.seconds,
                c.detail
            );
        }
        s
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Worst dot-product mismatch over `pairs` random `(x, y)` pairs.
pub fn worst_adjoint_mismatch(op: &dyn LinearOperator, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let x = random_vec(&mut rng, op.domain().len());
            let y = random_vec(&mut rng, op.range().len());
            adjoint_mismatch(op, &x, &y)
        })
        .fold(0.0, f64::max)
}

/// One check per operator: `pairs` random pairs, relative error below `tol`.
pub fn adjoint_suite(ops: &[OperatorRef], pairs: usize, tol: f64, seed: u64) -> Vec<CheckResult> {
    ops.iter()
        .enumerate()
        .map(|(i, op)| {
            let start = Instant::now();
            let worst = worst_adjoint_mismatch(op.as_ref(), pairs, seed.wrapping_add(i as u64));
            CheckResult::new(
                format!("adjoint/{}", op.label()),
                worst < tol,
                format!("worst relative mismatch {worst:.2e} over {pairs} pairs (tol {tol:.0e})"),
                start,
            )
        })
        .collect()
}

/// A small scan with every operator kind, for fast checks.
pub fn small_setup() -> (VolumeGrid, Arc<ScanGeometry>) {
    let grid = VolumeGrid::centered([12, 8, 6], [0.2, 0.2, 0.3]).expect("valid grid");
    let det = DetectorGrid::new(24, 14, [0.2, 0.2]).expect("valid detector");
    let geom = ScanGeometry::limited_arc(7, 50.0, 30.0, 32.0, det).expect("valid geometry");
    (grid, Arc::new(geom))
}

/// Every operator type of the crate instantiated on `grid` and `geom`.
pub fn operator_catalog(grid: VolumeGrid, geom: Arc<ScanGeometry>) -> Result<Vec<OperatorRef>> {
    let nviews = geom.nviews();
    let det = geom.detector;
    let vol = Shape::Volume(grid);
    let xray: OperatorRef = Arc::new(XRayTransform::new(grid, geom)?);
    let blur: OperatorRef = Arc::new(GaussianBlur::volume(grid, [0.5, 0.4, 0.6])?);
    let ramp: OperatorRef = Arc::new(SqrtRampFilter::new(nviews, det, 0.8)?);
    let dx: OperatorRef = Arc::new(FiniteDiff::new(grid, Axis::X));
    let da: OperatorRef = Arc::new(ObliqueDiff::new(grid, -25.0));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let dense = DenseMatrix::new(9, 13, random_vec(&mut rng, 9 * 13))?;
    Ok(vec![
        xray.clone(),
        blur.clone(),
        Arc::new(GaussianBlur::detector(nviews, det, [0.6, 0.9])?),
        Arc::new(GaussianBlur::depth(grid, 0.45)?),
        ramp.clone(),
        dx.clone(),
        Arc::new(FiniteDiff::new(grid, Axis::Y)),
        Arc::new(FiniteDiff::new(grid, Axis::Z)),
        da.clone(),
        Arc::new(ObliqueDiff::new(grid, 25.0)),
        Arc::new(Identity::new(vol)),
        Arc::new(Scaled::new(dx.clone(), -0.7)),
        Arc::new(Chain::new(vec![ramp, xray, blur])?),
        Arc::new(Stack::new(vec![dx, da])?),
        Arc::new(dense),
        Arc::new(Diagonal::new(random_vec(&mut rng, 11))),
    ])
}

/// Soft threshold, ball and coupling projections against brute-force
/// oracles, and the Moreau identity for every function kind.
pub fn prox_suite(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v = rng.random_range(-3.0..3.0);
        let t = rng.random_range(0.0..2.0);
        let got = prox_l1(&[v], t).expect("valid threshold")[0];
        // grid search of t|x| + (x − v)²/2 on a 1e-5 lattice
        let mut best = (f64::INFINITY, 0.0);
        for k in -400_000..=400_000 {
            let x = k as f64 * 1e-5;
            let f = t * x.abs() + 0.5 * (x - v) * (x - v);
            if f < best.0 {
                best = (f, x);
            }
        }
        worst = worst.max((got - best.1).abs());
    }
    out.push(CheckResult::new(
        "prox/soft-threshold",
        worst < 1e-4,
        format!("max deviation from grid search {worst:.2e}"),
        start,
    ));

    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let r = rng.random_range(0.1..1.0);
        let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let got = project_l2_ball(&y, &c, r).expect("valid ball");
        let inside = (y[0] - c[0]).hypot(y[1] - c[1]) <= r;
        let oracle = if inside {
            [y[0], y[1]]
        } else {
            // nearest point on the circle by angle search
            let n = 200_000;
            let mut best = (f64::INFINITY, [0.0; 2]);
            for k in 0..n {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let p = [c[0] + r * a.cos(), c[1] + r * a.sin()];
                let d = (p[0] - y[0]).hypot(p[1] - y[1]);
                if d < best.0 {
                    best = (d, p);
                }
            }
            best.1
        };
        worst = worst.max((got[0] - oracle[0]).hypot(got[1] - oracle[1]));
    }
    out.push(CheckResult::new(
        "prox/ball-projection",
        worst < 1e-4,
        format!("max deviation from angle search {worst:.2e}"),
        start,
    ));

    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a: [f64; 3] = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let (mut f1, mut f2, mut f3) = ([a[0]], [a[1]], [a[2]]);
        project_coupling_slices(&mut f1, &mut f2, &mut f3);
        // minimize over (p, q) with f1 = p + q: normal equations
        // [2 1; 1 2] [p; q] = [a1 + a2; a1 + a3]
        let (b1, b2) = (a[0] + a[1], a[0] + a[2]);
        let p = (2.0 * b1 - b2) / 3.0;
        let q = (2.0 * b2 - b1) / 3.0;
        worst = worst
            .max((f1[0] - (p + q)).abs())
            .max((f2[0] - p).abs())
            .max((f3[0] - q).abs());
    }
    out.push(CheckResult::new(
        "prox/coupling-projection",
        worst < 1e-4,
        format!("max deviation from normal equations {worst:.2e}"),
        start,
    ));

    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = 1 + k % 7;
        let v = random_vec(&mut rng, n)
            .iter()
            .map(|x| 3.0 * x)
            .collect::<Vec<_>>();
        let center = random_vec(&mut rng, n);
        let sigma = rng.random_range(0.05..5.0);
        let f = match k % 3 {
            0 => SeparableFunction::l1(rng.random_range(0.0..2.0)),
            1 => SeparableFunction::l2_ball(center, rng.random_range(0.0..2.0)),
            _ => SeparableFunction::squared_l2(center, rng.random_range(0.1..3.0)),
        }
        .expect("valid function");
        worst = worst.max(moreau_gap(&f, &v, sigma));
    }
    out.push(CheckResult::new(
        "prox/moreau-identity",
        worst < 1e-10,
        format!("max |v − prox_σF*(v) − σ prox_F/σ(v/σ)| = {worst:.2e} over 100 vectors"),
        start,
    ));
    out
}

/// `max |v − prox_{σF*}(v) − σ prox_{F/σ}(v/σ)|`.
pub fn moreau_gap(f: &SeparableFunction, v: &[f64], sigma: f64) -> f64 {
    let mut dual = vec![0.0; v.len()];
    f.prox_conjugate_into(v, sigma, &mut dual);
    let scaled: Vec<f64> = v.iter().map(|x| x / sigma).collect();
    let primal = f.prox(&scaled, 1.0 / sigma).expect("positive step");
    v.iter()
        .zip(&dual)
        .zip(&primal)
        .map(|((v, d), p)| (v - d - sigma * p).abs())
        .fold(0.0, f64::max)
}

/// Step-size condition `τ ‖Σ σ_i ν_i² K̂ᵢᵀK̂ᵢ‖` on the coupled problem built
/// from `cfg` with all-zero data.
pub fn step_condition_check(cfg: &RunConfig, gamma: f64, beta: f64) -> Result<CheckResult> {
    let start = Instant::now();
    let geom = cfg.lowres_geometry()?;
    let g = crate::grid::ProjectionSet::zeros(geom.nviews(), geom.detector);
    let mut problem = build_coupled_problem(&g, geom, cfg.lowres_grid()?, &cfg.lowres.problem())?;
    let power = cfg.solver.power();
    problem.estimate_block_norms(power)?;
    let steps = compute_step_sizes(&problem, gamma, beta, cfg.solver.rho, power)?;
    let value = step_condition(&problem, &steps, power)?;
    Ok(CheckResult::new(
        format!("steps/condition ({} blocks)", problem.blocks.len()),
        (0.99..=1.01).contains(&value),
        format!("tau * ||sum sigma nu^2 KtK|| = {value:.6} (gamma {gamma}, beta {beta})"),
        start,
    ))
}

#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    /// Image RMSE divided by the phantom's dynamic range.
    pub relative_rmse: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Reconstruct the configured phantom, sampled at the voxel centers of the
/// low-resolution grid so it is piecewise constant, from noiseless data generated with the same forward model. The `f2` path
/// is switched off through a data bound that zero already satisfies.
pub fn inverse_crime_recovery(
    cfg: &RunConfig,
    eps1: f64,
    max_iters: usize,
) -> Result<RecoveryOutcome> {
    let grid = cfg.lowres_grid()?;
    let geom = cfg.lowres_geometry()?;
    let mut spec = cfg.phantom.clone();
    spec.texture = None;
    let truth = voxelize(&spec, grid, 1)?;
    let problem = CoupledProblemConfig {
        eps1,
        eps2: 1e3,
        alpha_3: 0.0,
        ..cfg.lowres.problem()
    };
    let (g, truth) = inverse_crime_dataset(&truth, geom.clone(), problem.d1)?;
    let params = SolverParams {
        max_iters,
        ..cfg.solver.clone()
    };
    let low = reconstruct_lowres(&g, geom, grid, &problem, &params)?;
    let (lo, hi) = truth
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mse = low
        .f1
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.data().len() as f64;
    Ok(RecoveryOutcome {
        relative_rmse: mse.sqrt() / (hi - lo),
        iterations: low.report.iterations(),
        residual: low.residuals()[0],
    })
}

/// Reduced configuration whose recovery run finishes in seconds.
pub fn quick_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.geometry.detector = [96, 48];
    cfg.geometry.pitch = [0.1, 0.1];
    cfg.geometry.bin = [2, 2];
    cfg.geometry.strip = [44, 48];
    cfg.geometry.nviews = 11;
    cfg.lowres.dims = [20, 10, 6];
    cfg.lowres.voxel = [0.4, 0.4, 0.5];
    cfg.phantom.envelope_center = [0.0, 0.0, 0.0];
    cfg.phantom.envelope = [3.6, 3.6, 1.4];
    cfg.phantom.inclusions = vec![crate::sim::Inclusion::Sphere {
        center: [0.6, 1.9, 0.0],
        radius: 0.7,
        contrast: 0.2,
    }];
    cfg
}

/// Run the suites of a verification level.
pub fn run_verify(level: Level) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let (grid, geom) = small_setup();
    report
        .checks
        .extend(adjoint_suite(&operator_catalog(grid, geom)?, 10, 1e-6, 1));
    report.checks.extend(prox_suite(2));

    let quick = quick_config();
    report
        .checks
        .push(step_condition_check(&quick, 5.0, 100.0)?);
    let start = Instant::now();
    let rec = inverse_crime_recovery(&quick, 1e-4, 2000)?;
    report.checks.push(CheckResult::new(
        "recovery/quick",
        rec.relative_rmse < 0.01,
        format!(
            "relative RMSE {:.3e} after {} iterations (data RMSE {:.2e})",
            rec.relative_rmse, rec.iterations, rec.residual
        ),
        start,
    ));

    if level == Level::Full {
        let desk = RunConfig::default();
        report.checks.push(step_condition_check(&desk, 5.0, 100.0)?);
        let start = Instant::now();
        let rec = inverse_crime_recovery(&desk, 1e-4, 2000)?;
        report.checks.push(CheckResult::new(
            "recovery/desk",
            rec.relative_rmse < 0.01,
            format!(
                "relative RMSE {:.3e} after {} iterations (data RMSE {:.2e})",
                rec.relative_rmse, rec.iterations, rec.residual
            ),
            start,
        ));
    }
    Ok(report)
}
