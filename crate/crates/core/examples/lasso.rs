//! Sparse recovery: `min ½‖Ax − b‖² + λ‖x‖₁` with the ℓ1 term handled as
//! the primal function of the PDHG solver.

use std::sync::Arc;

use dbt_recon::operators::{DenseMatrix, OperatorRef, Shape};
use dbt_recon::prox::SeparableFunction;
use dbt_recon::solver::{
    compute_step_sizes, solve, Block, PowerSettings, PrimalConstraint, ProblemSpec, StoppingRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> dbt_recon::Result<()> {
    let (m, n) = (40, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..m * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt())
        .collect();
    let mut truth = vec![0.0; n];
    for (k, v) in [(7, 1.5), (23, -2.0), (61, 1.0), (90, 0.8)] {
        truth[k] = v;
    }
    let b: Vec<f64> = (0..m)
        .map(|i| {
            (0..n).map(|j| a[i * n + j] * truth[j]).sum::<f64>()
                + 0.01 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let op: OperatorRef = Arc::new(DenseMatrix::new(m, n, a)?);
    let blocks = vec![Block::new(
        "least-squares",
        op,
        SeparableFunction::squared_l2(b, 1.0)?,
        0,
    )];
    let mut problem = ProblemSpec::new(
        vec![Shape::Vector(n)],
        blocks,
        PrimalConstraint::L1 { weight: 0.02 },
    )?;
    let power = PowerSettings::default();
    problem.estimate_block_norms(power)?;
    let steps = compute_step_sizes(&problem, 1.0, 1.0, 1.75, power)?;
    let (x, report) = solve(
        &problem,
        &steps,
        StoppingRule {
            max_iters: 20_000,
            change_tol: 1e-9,
            ..Default::default()
        },
    )?;
    println!(
        "stopped after {} iterations ({:?})",
        report.iterations(),
        report.stop
    );
    for (j, v) in x[0].iter().enumerate().filter(|(_, v)| v.abs() > 0.05) {
        println!("x[{j:>2}] = {v:>7.3}  (true {:>5.2})", truth[j]);
    }
    Ok(())
}
