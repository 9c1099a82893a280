//! Step sizes from the two-parameter (γ, β) family.
//!
//! Relative weights are `ŵ_i = γ` for X-ray blocks and 1 otherwise. The
//! magnitude is `w = ‖Σ ŵ_i K̂ᵢᵀK̂ᵢ‖⁻¹`, and
//!
//! ```text
//! ν_i = sqrt(ŵ_i),  τ = sqrt(w / β),  σ_i = sqrt(w β)
//! ```
//!
//! so every ratio `σ_i / τ` equals β and `τ ‖Σ σ_i ν_i² K̂ᵢᵀK̂ᵢ‖ = 1`.

use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::operators::{power_iteration, NORM_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeConfig {
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    /// Step magnitude `w`.
    pub w: f64,
    pub tau: f64,
    pub relative_weights: Vec<f64>,
    pub ratios: Vec<f64>,
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Largest eigenvalue of `Σ c_i K̂ᵢᵀK̂ᵢ` acting on the stacked primal vector.
pub fn weighted_normal_norm(
    problem: &ProblemSpec,
    norms: &[f64],
    coeffs: &[f64],
    power: PowerSettings,
    seed: u64,
) -> Result<f64> {
    let offsets = problem.column_offsets();
    let n = problem.primal_len();
    let est = power_iteration(n, power.tol, power.max_iters, seed, |x| {
        let mut out = vec![0.0; n];
        for ((b, &nrm), &c) in problem.blocks.iter().zip(norms).zip(coeffs) {
            let (lo, hi) = (offsets[b.column], offsets[b.column + 1]);
            let kx = b.operator.forward_vec(&x[lo..hi]);
            let ktkx = b.operator.adjoint_vec(&kx);
            let s = c / (nrm * nrm);
            out[lo..hi]
                .iter_mut()
                .zip(&ktkx)
                .for_each(|(o, v)| *o += s * v);
        }
        out
    });
    if !est.converged {
        return Err(Error::NormNotConverged {
            estimate: est.eigenvalue,
            iterations: est.iterations,
        });
    }
    Ok(est.eigenvalue)
}

pub fn compute_step_sizes(
    problem: &ProblemSpec,
    gamma: f64,
    beta: f64,
    rho: f64,
    power: PowerSettings,
) -> Result<StepSizeConfig> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be >= 1, got {gamma}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("beta must be > 0, got {beta}")));
    }
    if !(rho > 0.0 && rho < 2.0) {
        return Err(Error::param(format!("rho must lie in (0, 2), got {rho}")));
    }
    let norms = problem.block_norms()?;
    let relative_weights: Vec<f64> = problem
        .blocks
        .iter()
        .map(|b| if b.xray { gamma } else { 1.0 })
        .collect();
    let lambda = weighted_normal_norm(problem, &norms, &relative_weights, power, NORM_SEED)?;
    let w = 1.0 / lambda;
    let nb = problem.blocks.len();
    Ok(StepSizeConfig {
        gamma,
        beta,
        rho,
        w,
        tau: (w / beta).sqrt(),
        nu: relative_weights.iter().map(|r| r.sqrt()).collect(),
        sigma: vec![(w * beta).sqrt(); nb],
        ratios: vec![beta; nb],
        relative_weights,
    })
}

/// `τ ‖Σ σ_i ν_i² K̂ᵢᵀK̂ᵢ‖₂`, evaluated with an independent power-method start.
pub fn step_condition(
    problem: &ProblemSpec,
    steps: &StepSizeConfig,
    power: PowerSettings,
) -> Result<f64> {
    let norms = problem.block_norms()?;
    let coeffs: Vec<f64> = steps
        .sigma
        .iter()
        .zip(&steps.nu)
        .map(|(s, n)| s * n * n)
        .collect();
    Ok(steps.tau * weighted_normal_norm(problem, &norms, &coeffs, power, NORM_SEED ^ 0x9e37_79b9)?)
}
