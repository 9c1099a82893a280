//! Step sizes of the 13-block coupled problem for a few (γ, β) pairs, with
//! the convergence condition evaluated by power iteration.

use dbt_recon::grid::ProjectionSet;
use dbt_recon::pipeline::{build_coupled_problem, BLOCK_NAMES};
use dbt_recon::solver::{compute_step_sizes, step_condition};
use dbt_recon::verify::quick_config;

fn main() -> dbt_recon::Result<()> {
    let cfg = quick_config();
    let geom = cfg.lowres_geometry()?;
    let g = ProjectionSet::zeros(geom.nviews(), geom.detector);
    let mut problem = build_coupled_problem(&g, geom, cfg.lowres_grid()?, &cfg.lowres.problem())?;
    let power = cfg.solver.power();
    problem.estimate_block_norms(power)?;
    for (name, block) in BLOCK_NAMES.iter().zip(&problem.blocks) {
        println!("{name:<7} ||K|| = {:.4}", block.norm.unwrap_or(f64::NAN));
    }
    for (gamma, beta) in [(1.0, 1.0), (5.0, 100.0), (5.0, 1.0)] {
        let steps = compute_step_sizes(&problem, gamma, beta, cfg.solver.rho, power)?;
        let c = step_condition(&problem, &steps, power)?;
        println!(
            "gamma {gamma:>4} beta {beta:>6}: w {:.3e} tau {:.3e} sigma {:.3e} condition {c:.6}",
            steps.w, steps.tau, steps.sigma[0]
        );
    }
    Ok(())
}
