//! Proximal maps of the three separable functions, their conjugates, and
//! the Moreau decomposition `v = prox_{σF*}(v) + σ prox_{F/σ}(v/σ)`.

use dbt_recon::prox::{project_coupling_slices, prox_conjugate, SeparableFunction};

fn main() -> dbt_recon::Result<()> {
    let v = [2.0, -0.3, 0.8, -1.5];
    let center = vec![0.5, 0.0, 0.5, 0.0];
    let sigma = 0.7;
    let functions = [
        ("l1, weight 0.5", SeparableFunction::l1(0.5)?),
        (
            "ball, radius 1",
            SeparableFunction::l2_ball(center.clone(), 1.0)?,
        ),
        (
            "squared l2, weight 2",
            SeparableFunction::squared_l2(center, 2.0)?,
        ),
    ];
    for (name, f) in &functions {
        let primal = f.prox(&v, 1.0)?;
        let dual = prox_conjugate(f, &v, sigma)?;
        let scaled: Vec<f64> = v.iter().map(|x| x / sigma).collect();
        let back = f.prox(&scaled, 1.0 / sigma)?;
        let gap = v
            .iter()
            .zip(&dual)
            .zip(&back)
            .map(|((vi, d), p)| (vi - d - sigma * p).abs())
            .fold(0.0, f64::max);
        println!("{name}");
        println!("  prox(v)         = {primal:.4?}");
        println!("  prox_sigma F*(v) = {dual:.4?}");
        println!("  Moreau gap      = {gap:.1e}");
    }

    // nearest point with f1 = f2 + f3
    let (mut f1, mut f2, mut f3) = (vec![1.0], vec![0.2], vec![0.1]);
    project_coupling_slices(&mut f1, &mut f2, &mut f3);
    println!(
        "coupling projection of (1.0, 0.2, 0.1): ({:.4}, {:.4}, {:.4})",
        f1[0], f2[0], f3[0]
    );
    Ok(())
}
