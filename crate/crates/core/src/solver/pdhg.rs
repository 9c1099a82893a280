//! The PDHG iteration, relaxation, and the outer solve loop.
//!
//! One iteration, with `K̂_i = K_i / ‖K_i‖`:
//!
//! ```text
//! x⁺   = prox_{τG}(x − τ Σ ν_i K̂ᵢᵀ λ_i)
//! x̃    = 2x⁺ − x
//! λ_i⁺ = prox_{σ_i F̂ᵢ*}(λ_i + σ_i ν_i K̂_i x̃),   F̂_i(y) = F_i(y ‖K_i‖ / ν_i)
//! (x, λ) ← (x, λ) + ρ ((x⁺, λ⁺) − (x, λ))
//! ```
//!
//! `K_i x` is tracked alongside `x` by linearity and recomputed exactly every
//! `refresh_every` iterations, so residuals and objective cost no extra
//! projections.

use std::fmt::Write as _;

use super::{PrimalConstraint, ProblemSpec, StepSizeConfig};
use crate::error::{Error, Result};
use crate::operators::dot;
use crate::prox::{project_coupling_slices, soft_threshold, SeparableFunction};

/// Abort when `‖x‖` exceeds this multiple of its first nonzero value.
const DIVERGENCE_GROWTH: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub max_iters: usize,
    /// Allowed excess of each ball residual (RMSE units) over its bound.
    pub residual_tol: f64,
    /// Relative primal change below which the run may stop; 0 disables early exit.
    pub change_tol: f64,
    /// Iterations between exact recomputations of `K_i x`.
    pub refresh_every: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            residual_tol: 1e-3,
            change_tol: 1e-6,
            refresh_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sum of the finite (non-indicator) terms.
    pub objective: f64,
    /// `‖K_i x − c_i‖ / sqrt(m_i)` for each ball block, in block order.
    pub residuals: Vec<f64>,
    /// `‖x_new − x‖ / max(‖x_new‖, tiny)`.
    pub primal_change: f64,
    /// `sqrt(Σ ‖λ_i,new − λ_i‖²)`.
    pub dual_change: f64,
    /// `sqrt(‖Δx‖² / τ + Σ ‖Δλ_i‖² / σ_i)`.
    pub combined_change: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
    kx: Vec<Vec<f64>>,
    initial_scale: Option<f64>,
}

impl SolverState {
    pub fn x_stacked_norm(&self) -> f64 {
        self.x.iter().map(|c| dot(c, c)).sum::<f64>().sqrt()
    }

    /// Cached `K_i x` for block `i`.
    pub fn block_image(&self, i: usize) -> &[f64] {
        &self.kx[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Converged,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub block_names: Vec<String>,
    /// Names and bounds (RMSE units) of the ball blocks, in residual order.
    pub constraints: Vec<(String, f64)>,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl ConvergenceReport {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iteration)
    }

    pub fn final_residuals(&self) -> &[f64] {
        self.history.last().map_or(&[], |r| &r.residuals)
    }

    /// Tab-separated history, one row per iteration.
    pub fn to_tsv(&self) -> String {
        let mut s =
            String::from("iteration\tobjective\tprimal_change\tdual_change\tcombined_change");
        for (name, bound) in &self.constraints {
            let _ = write!(s, "\tresidual_{name}(eps={bound:e})");
        }
        s.push('\n');
        for r in &self.history {
            let _ = write!(
                s,
                "{}\t{:.9e}\t{:.6e}\t{:.6e}\t{:.6e}",
                r.iteration, r.objective, r.primal_change, r.dual_change, r.combined_change
            );
            for v in &r.residuals {
                let _ = write!(s, "\t{v:.9e}");
            }
            s.push('\n');
        }
        s
    }
}

/// A problem bound to its step sizes, with the scaled functions prepared.
pub struct Pdhg<'a> {
    problem: &'a ProblemSpec,
    steps: &'a StepSizeConfig,
    norms: Vec<f64>,
    scaled: Vec<SeparableFunction>,
}

impl<'a> Pdhg<'a> {
    pub fn new(problem: &'a ProblemSpec, steps: &'a StepSizeConfig) -> Result<Self> {
        let norms = problem.block_norms()?;
        let nb = problem.blocks.len();
        if steps.nu.len() != nb || steps.sigma.len() != nb {
            return Err(Error::shape("step sizes do not match the block count"));
        }
        if !(steps.tau > 0.0) || steps.sigma.iter().chain(&steps.nu).any(|v| !(*v > 0.0)) {
            return Err(Error::param("tau, sigma_i and nu_i must be positive"));
        }
        if !(steps.rho > 0.0 && steps.rho < 2.0) {
            return Err(Error::param("rho must lie in (0, 2)"));
        }
        let scaled = problem
            .blocks
            .iter()
            .zip(&norms)
            .zip(&steps.nu)
            .map(|((b, n), nu)| b.function.scaled(n / nu))
            .collect();
        Ok(Self {
            problem,
            steps,
            norms,
            scaled,
        })
    }

    pub fn zero_state(&self) -> SolverState {
        let x = self
            .problem
            .columns
            .iter()
            .map(|c| vec![0.0; c.len()])
            .collect();
        self.state_from(x).expect("zero state has matching shapes")
    }

    /// Start from a given primal point with zero duals.
    pub fn state_from(&self, x: Vec<Vec<f64>>) -> Result<SolverState> {
        if x.len() != self.problem.columns.len()
            || x.iter()
                .zip(&self.problem.columns)
                .any(|(v, c)| v.len() != c.len())
        {
            return Err(Error::shape(
                "initial point does not match the problem columns",
            ));
        }
        let duals = self
            .problem
            .blocks
            .iter()
            .map(|b| vec![0.0; b.operator.range().len()])
            .collect();
        let mut state = SolverState {
            x,
            duals,
            iteration: 0,
            history: Vec::new(),
            kx: Vec::new(),
            initial_scale: None,
        };
        self.refresh(&mut state);
        let n = state.x_stacked_norm();
        if n > 0.0 {
            state.initial_scale = Some(n);
        }
        Ok(state)
    }

    fn refresh(&self, state: &mut SolverState) {
        state.kx = self
            .problem
            .blocks
            .iter()
            .map(|b| b.operator.forward_vec(&state.x[b.column]))
            .collect();
    }

    fn constraint_bounds(&self) -> Vec<(String, f64)> {
        self.problem
            .blocks
            .iter()
            .filter_map(|b| match &b.function {
                SeparableFunction::L2Ball { center, radius } => {
                    Some((b.name.clone(), radius / (center.len() as f64).sqrt()))
                }
                _ => None,
            })
            .collect()
    }

    /// Objective terms and ball residuals at the current point.
    pub fn evaluate(&self, state: &SolverState) -> (f64, Vec<f64>) {
        let mut objective = 0.0;
        let mut residuals = Vec::new();
        for (b, kx) in self.problem.blocks.iter().zip(&state.kx) {
            match &b.function {
                SeparableFunction::L2Ball { center, .. } => {
                    let d: f64 = kx.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                    residuals.push((d / center.len() as f64).sqrt());
                }
                f => objective += f.value(kx),
            }
        }
        if let PrimalConstraint::L1 { weight } = self.problem.constraint {
            objective += weight * state.x.iter().flatten().map(|v| v.abs()).sum::<f64>();
        }
        (objective, residuals)
    }

    fn prox_g(&self, x: &mut [Vec<f64>]) {
        match self.problem.constraint {
            PrimalConstraint::Free => {}
            PrimalConstraint::Coupling => {
                let (a, rest) = x.split_at_mut(1);
                let (b, c) = rest.split_at_mut(1);
                project_coupling_slices(&mut a[0], &mut b[0], &mut c[0]);
            }
            PrimalConstraint::L1 { weight } => {
                let t = self.steps.tau * weight;
                x.iter_mut()
                    .flatten()
                    .for_each(|v| *v = soft_threshold(*v, t));
            }
        }
    }

    /// One relaxed PDHG update of `state`.
    pub fn iterate(&self, state: &mut SolverState) -> Result<()> {
        let blocks = &self.problem.blocks;
        let steps = self.steps;
        let tau = steps.tau;
        let rho = steps.rho;

        // primal: x⁺ = prox_{τG}(x − τ Σ ν_i K̂ᵢᵀ λ_i)
        let mut x_plus = state.x.clone();
        for (i, b) in blocks.iter().enumerate() {
            if state.duals[i].iter().all(|&l| l == 0.0) {
                continue;
            }
            let g = b.operator.adjoint_vec(&state.duals[i]);
            let s = tau * steps.nu[i] / self.norms[i];
            x_plus[b.column]
                .iter_mut()
                .zip(&g)
                .for_each(|(x, gv)| *x -= s * gv);
        }
        self.prox_g(&mut x_plus);

        let x_bar: Vec<Vec<f64>> = x_plus
            .iter()
            .zip(&state.x)
            .map(|(p, x)| p.iter().zip(x).map(|(a, b)| 2.0 * a - b).collect())
            .collect();

        // dual: λ_i⁺ = prox_{σ_i F̂ᵢ*}(λ_i + σ_i ν_i K̂_i x̃), then relax
        let mut dual_sq = 0.0;
        let mut dual_metric = 0.0;
        let mut arg = Vec::new();
        let mut lam_plus = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            let kxb = b.operator.forward_vec(&x_bar[b.column]);
            let c = steps.sigma[i] * steps.nu[i] / self.norms[i];
            arg.clear();
            arg.extend(state.duals[i].iter().zip(&kxb).map(|(l, k)| l + c * k));
            lam_plus.resize(arg.len(), 0.0);
            self.scaled[i].prox_conjugate_into(&arg, steps.sigma[i], &mut lam_plus);
            let mut sq = 0.0;
            for (l, lp) in state.duals[i].iter_mut().zip(&lam_plus) {
                let d = rho * (lp - *l);
                sq += d * d;
                *l += d;
            }
            dual_sq += sq;
            dual_metric += sq / steps.sigma[i];
            // K x⁺ = (K x̃ + K x) / 2, relaxed the same way as x
            for (k, kb) in state.kx[i].iter_mut().zip(&kxb) {
                *k += rho * 0.5 * (kb - *k);
            }
        }

        let mut primal_sq = 0.0;
        let mut new_sq = 0.0;
        for (x, xp) in state.x.iter_mut().zip(&x_plus) {
            for (v, p) in x.iter_mut().zip(xp) {
                let d = rho * (p - *v);
                primal_sq += d * d;
                *v += d;
                new_sq += *v * *v;
            }
        }
        state.iteration += 1;

        if !(primal_sq.is_finite() && dual_sq.is_finite() && new_sq.is_finite()) {
            return Err(Error::Divergence {
                iteration: state.iteration,
                reason: "non-finite iterate".into(),
            });
        }
        let x_norm = new_sq.sqrt();
        match state.initial_scale {
            None if x_norm > 0.0 => state.initial_scale = Some(x_norm),
            Some(s) if x_norm > DIVERGENCE_GROWTH * s => {
                return Err(Error::Divergence {
                    iteration: state.iteration,
                    reason: format!("‖x‖ grew from {s:.3e} to {x_norm:.3e}"),
                })
            }
            _ => {}
        }

        let (objective, residuals) = self.evaluate(state);
        state.history.push(IterationRecord {
            iteration: state.iteration,
            objective,
            residuals,
            primal_change: primal_sq.sqrt() / x_norm.max(f64::MIN_POSITIVE),
            dual_change: dual_sq.sqrt(),
            combined_change: (primal_sq / tau + dual_metric).sqrt(),
        });
        Ok(())
    }

    pub fn run(
        &self,
        state: &mut SolverState,
        stopping: StoppingRule,
    ) -> Result<ConvergenceReport> {
        let bounds = self.constraint_bounds();
        let mut stop = StopReason::MaxIterations;
        let refresh_every = stopping.refresh_every.max(1);
        while state.iteration < stopping.max_iters {
            self.iterate(state)?;
            if state.iteration % refresh_every == 0 {
                self.refresh(state);
            }
            let last = state.history.last().expect("iterate records history");
            let feasible = last
                .residuals
                .iter()
                .zip(&bounds)
                .all(|(r, (_, eps))| *r <= eps + stopping.residual_tol);
            // a zero primal step with moving duals is not a fixed point
            let settled = last.primal_change > 0.0 || last.dual_change == 0.0;
            if stopping.change_tol > 0.0
                && feasible
                && settled
                && last.primal_change < stopping.change_tol
            {
                stop = StopReason::Converged;
                break;
            }
        }
        self.refresh(state);
        let (objective, residuals) = self.evaluate(state);
        if let Some(last) = state.history.last_mut() {
            last.objective = objective;
            last.residuals = residuals;
        }
        Ok(ConvergenceReport {
            block_names: self.problem.blocks.iter().map(|b| b.name.clone()).collect(),
            constraints: bounds,
            history: state.history.clone(),
            stop,
        })
    }
}

/// One PDHG iteration on `state`.
pub fn pdhg_iterate(
    problem: &ProblemSpec,
    steps: &StepSizeConfig,
    state: &mut SolverState,
) -> Result<()> {
    Pdhg::new(problem, steps)?.iterate(state)
}

/// Run PDHG from zero until the stopping rule fires.
pub fn solve(
    problem: &ProblemSpec,
    steps: &StepSizeConfig,
    stopping: StoppingRule,
) -> Result<(Vec<Vec<f64>>, ConvergenceReport)> {
    let pdhg = Pdhg::new(problem, steps)?;
    let mut state = pdhg.zero_state();
    let report = pdhg.run(&mut state, stopping)?;
    Ok((state.x, report))
}
