//! Build each linear operator on a small scan, report its norm and the
//! worst dot-product mismatch between forward and adjoint.

use dbt_recon::operators::estimate_norm;
use dbt_recon::verify::{operator_catalog, small_setup, worst_adjoint_mismatch};

fn main() -> dbt_recon::Result<()> {
    let (grid, geom) = small_setup();
    println!(
        "volume {:?} at {:?} cm, {} views on a {}x{} detector",
        grid.dims,
        grid.spacing,
        geom.nviews(),
        geom.detector.nu,
        geom.detector.nv
    );
    println!("{:<40} {:>10} {:>12}", "operator", "norm", "adjoint err");
    for op in operator_catalog(grid, geom)? {
        let norm = estimate_norm(op.as_ref(), 1e-6, 10_000)?;
        let err = worst_adjoint_mismatch(op.as_ref(), 10, 1);
        println!("{:<40} {:>10.4} {:>12.2e}", op.label(), norm, err);
    }
    Ok(())
}
