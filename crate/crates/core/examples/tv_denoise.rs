//! Anisotropic TV denoising of a small image with the block PDHG solver.

use std::sync::Arc;

use dbt_recon::grid::VolumeGrid;
use dbt_recon::operators::{Axis, FiniteDiff, Identity, OperatorRef, Shape, Stack};
use dbt_recon::prox::SeparableFunction;
use dbt_recon::solver::{
    compute_step_sizes, solve, Block, PowerSettings, PrimalConstraint, ProblemSpec, StoppingRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dbt_recon::Result<()> {
    let n = 24;
    let grid = VolumeGrid::centered([n, n, 1], [1.0; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clean: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = ((k % n) as f64 - 12.0, (k / n) as f64 - 12.0);
            if i * i + j * j < 49.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let noisy: Vec<f64> = clean
        .iter()
        .map(|v| v + rng.random_range(-0.3..0.3))
        .collect();

    let shape = Shape::Volume(grid);
    let grad: OperatorRef = Arc::new(Stack::new(vec![
        Arc::new(FiniteDiff::new(grid, Axis::X)),
        Arc::new(FiniteDiff::new(grid, Axis::Y)),
    ])?);
    let blocks = vec![
        Block::new(
            "fidelity",
            Arc::new(Identity::new(shape)),
            SeparableFunction::squared_l2(noisy.clone(), 1.0)?,
            0,
        ),
        Block::new("tv", grad, SeparableFunction::l1(0.25)?, 0),
    ];
    let mut problem = ProblemSpec::new(vec![shape], blocks, PrimalConstraint::Free)?;
    let power = PowerSettings::default();
    problem.estimate_block_norms(power)?;
    let steps = compute_step_sizes(&problem, 1.0, 1.0, 1.75, power)?;
    let (x, report) = solve(
        &problem,
        &steps,
        StoppingRule {
            max_iters: 3000,
            ..Default::default()
        },
    )?;

    let err = |a: &[f64]| {
        (a.iter()
            .zip(&clean)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / a.len() as f64)
            .sqrt()
    };
    println!(
        "RMSE noisy {:.4}, denoised {:.4} after {} iterations",
        err(&noisy),
        err(&x[0]),
        report.iterations()
    );
    for j in (0..n).step_by(2) {
        let row: String = (0..n)
            .map(|i| if x[0][i + n * j] > 0.5 { '#' } else { '.' })
            .collect();
        println!("{row}");
    }
    Ok(())
}
