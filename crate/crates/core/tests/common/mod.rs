#![allow(dead_code)]

//! Independent reference solvers shared by the solver tests and the
//! acceptance run.

use std::sync::Arc;

use dbt_recon::grid::VolumeGrid;
use dbt_recon::operators::{Axis, DenseMatrix, FiniteDiff, Identity, OperatorRef, Shape, Stack};
use dbt_recon::prox::SeparableFunction;
use dbt_recon::solver::{
    compute_step_sizes, solve, Block, PowerSettings, PrimalConstraint, ProblemSpec, StoppingRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn fixed_iterations(n: usize) -> StoppingRule {
    StoppingRule {
        max_iters: n,
        change_tol: 0.0,
        ..Default::default()
    }
}

pub fn solve_with_unit_gamma(mut problem: ProblemSpec, iters: usize) -> Vec<Vec<f64>> {
    let power = PowerSettings {
        tol: 1e-10,
        max_iters: 100_000,
    };
    problem.estimate_block_norms(power).unwrap();
    let steps = compute_step_sizes(&problem, 1.0, 1.0, 1.75, power).unwrap();
    solve(&problem, &steps, fixed_iterations(iters)).unwrap().0
}

/// Forward differences with nothing past the last sample, as a plain loop.
fn grad2(u: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; n * n];
    let mut gy = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n {
                gx[i + n * j] = u[i + 1 + n * j] - u[i + n * j];
            }
            if j + 1 < n {
                gy[i + n * j] = u[i + n * (j + 1)] - u[i + n * j];
            }
        }
    }
    (gx, gy)
}

fn grad2_adjoint(px: &[f64], py: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n {
                out[i + 1 + n * j] += px[i + n * j];
                out[i + n * j] -= px[i + n * j];
            }
            if j + 1 < n {
                out[i + n * (j + 1)] += py[i + n * j];
                out[i + n * j] -= py[i + n * j];
            }
        }
    }
    out
}

/// `min ½‖u − y‖² + λ‖∇u‖₁` through projected gradient on the dual box
/// `|p|∞ ≤ λ`, with `u = y − ∇ᵀp`.
pub fn tv_denoise_oracle(y: &[f64], n: usize, lambda: f64, iters: usize) -> Vec<f64> {
    let (mut px, mut py) = (vec![0.0; n * n], vec![0.0; n * n]);
    let step = 1.0 / 8.0;
    for _ in 0..iters {
        let div = grad2_adjoint(&px, &py, n);
        let u: Vec<f64> = y.iter().zip(&div).map(|(a, b)| a - b).collect();
        let (gx, gy) = grad2(&u, n);
        for k in 0..n * n {
            px[k] = (px[k] + step * gx[k]).clamp(-lambda, lambda);
            py[k] = (py[k] + step * gy[k]).clamp(-lambda, lambda);
        }
    }
    let div = grad2_adjoint(&px, &py, n);
    y.iter().zip(&div).map(|(a, b)| a - b).collect()
}

/// Noisy 8×8 two-level image.
pub fn tv_instance(seed: u64) -> (usize, Vec<f64>) {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let base = if i >= 3 && (2..6).contains(&j) {
                1.0
            } else {
                0.2
            };
            base + 0.15 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (n, y)
}

/// `min ½‖u − y‖² + λ(‖Dx u‖₁ + ‖Dy u‖₁)` by PDHG.
pub fn tv_denoise_pdhg(y: &[f64], n: usize, lambda: f64, iters: usize) -> Vec<f64> {
    let grid = VolumeGrid::centered([n, n, 1], [1.0; 3]).unwrap();
    let shape = Shape::Volume(grid);
    let d: OperatorRef = Arc::new(
        Stack::new(vec![
            Arc::new(FiniteDiff::new(grid, Axis::X)),
            Arc::new(FiniteDiff::new(grid, Axis::Y)),
        ])
        .unwrap(),
    );
    let blocks = vec![
        Block::new(
            "fidelity",
            Arc::new(Identity::new(shape)),
            SeparableFunction::squared_l2(y.to_vec(), 1.0).unwrap(),
            0,
        ),
        Block::new("tv", d, SeparableFunction::l1(lambda).unwrap(), 0),
    ];
    let problem = ProblemSpec::new(vec![shape], blocks, PrimalConstraint::Free).unwrap();
    solve_with_unit_gamma(problem, iters).remove(0)
}

/// Cyclic coordinate descent for `½‖Ax − b‖² + λ‖x‖₁`.
pub fn lasso_oracle(a: &[f64], m: usize, n: usize, b: &[f64], lambda: f64) -> Vec<f64> {
    let col = |j: usize| (0..m).map(move |i| a[i * n + j]);
    let norms: Vec<f64> = (0..n).map(|j| col(j).map(|v| v * v).sum()).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for j in 0..n {
            let rho: f64 = col(j).zip(&r).map(|(v, ri)| v * ri).sum::<f64>() + norms[j] * x[j];
            let new = if rho > lambda {
                (rho - lambda) / norms[j]
            } else if rho < -lambda {
                (rho + lambda) / norms[j]
            } else {
                0.0
            };
            let delta = new - x[j];
            if delta != 0.0 {
                for i in 0..m {
                    r[i] -= a[i * n + j] * delta;
                }
                x[j] = new;
            }
            change = change.max(delta.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    x
}

pub struct LassoInstance {
    pub m: usize,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda: f64,
}

pub fn lasso_instances(seed: u64, count: usize) -> Vec<LassoInstance> {
    let (m, n) = (10, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| LassoInstance {
            m,
            n,
            a: (0..m * n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            b: (0..m)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            lambda: 0.5,
        })
        .collect()
}

/// `min ½‖Ax − b‖² + λ‖x‖₁` by PDHG, with the ℓ1 term as the primal function.
pub fn lasso_pdhg(inst: &LassoInstance, iters: usize) -> Vec<f64> {
    let op: OperatorRef = Arc::new(DenseMatrix::new(inst.m, inst.n, inst.a.clone()).unwrap());
    let blocks = vec![Block::new(
        "ls",
        op,
        SeparableFunction::squared_l2(inst.b.clone(), 1.0).unwrap(),
        0,
    )];
    let problem = ProblemSpec::new(
        vec![Shape::Vector(inst.n)],
        blocks,
        PrimalConstraint::L1 {
            weight: inst.lambda,
        },
    )
    .unwrap();
    solve_with_unit_gamma(problem, iters).remove(0)
}
