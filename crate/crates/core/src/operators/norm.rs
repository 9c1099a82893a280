//! Operator norm by power iteration on `AᵀA`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm2, LinearOperator};
use crate::error::{Error, Result};

/// Seed of the random start vector, fixed so estimates are reproducible.
pub const NORM_SEED: u64 = 0x6e6f_726d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Dominant eigenvalue of the symmetric positive semidefinite map.
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvalue of a symmetric PSD map on `R^n`, by power iteration
/// with Rayleigh-quotient estimates. Stops when two successive estimates
/// differ by less than `tol` relative.
pub fn power_iteration(
    n: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        let w = apply(&v);
        let lambda = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return NormEstimate {
                eigenvalue: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (lambda - prev).abs() <= tol * lambda.abs() {
            return NormEstimate {
                eigenvalue: lambda,
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    NormEstimate {
        eigenvalue: prev,
        iterations: max_iters,
        converged: false,
    }
}

/// Largest singular value `‖A‖₂`.
pub fn estimate_norm(op: &dyn LinearOperator, tol: f64, max_iters: usize) -> Result<f64> {
    let n = op.domain().len();
    let est = power_iteration(n, tol, max_iters, NORM_SEED, |v| {
        op.adjoint_vec(&op.forward_vec(v))
    });
    if !est.converged {
        return Err(Error::NormNotConverged {
            estimate: est.eigenvalue.max(0.0).sqrt(),
            iterations: est.iterations,
        });
    }
    Ok(est.eigenvalue.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Diagonal, Identity, Shape};

    #[test]
    fn identity_has_unit_norm() {
        let n = estimate_norm(&Identity::new(Shape::Vector(17)), 1e-10, 100).unwrap();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn diagonal_norm_is_max_entry() {
        let n = estimate_norm(&Diagonal::new(vec![1.0, 2.0, 3.0]), 1e-12, 1000).unwrap();
        assert!((n - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_convergence_reports_last_estimate() {
        let d = Diagonal::new((0..50).map(|i| 1.0 + i as f64 * 1e-3).collect());
        match estimate_norm(&d, 1e-15, 3) {
            Err(Error::NormNotConverged {
                estimate,
                iterations,
            }) => {
                assert_eq!(iterations, 3);
                assert!(estimate > 1.0 && estimate <= 1.05);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
