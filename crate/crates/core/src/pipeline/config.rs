use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{PowerSettings, StoppingRule};

/// Parameters of the coupled low-resolution problem.
///
/// The five DTV weights act on `f1` and `f2` alike and must sum to one;
/// `alpha_3` weights `‖f3‖₁`. The data bounds are RMSE values on the
/// ramp-filtered projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledProblemConfig {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_1: f64,
    pub alpha_3: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Blur of `f1` (cm FWHM, x/y/z).
    pub d1: [f64; 3],
    /// Blur of `f2` (cm FWHM, x/y/z).
    pub d2: [f64; 3],
    /// Detector blur of the `f2` data target (cm FWHM, u/v).
    pub dd: [f64; 2],
    /// Ramp cutoff as a fraction of Nyquist.
    pub c: f64,
    /// The oblique derivatives run at `±theta` degrees in the xz-plane.
    pub theta: f64,
}

impl Default for CoupledProblemConfig {
    fn default() -> Self {
        Self {
            alpha_x: 5.0 / 9.0,
            alpha_y: 1.0 / 9.0,
            alpha_a: 1.0 / 9.0,
            alpha_b: 1.0 / 9.0,
            alpha_1: 1.0 / 9.0,
            alpha_3: 0.1,
            eps1: 0.015,
            eps2: 0.015,
            d1: [0.136, 0.136, 0.272],
            d2: [1.5, 1.5, 0.272],
            dd: [2.0, 2.0],
            c: 1.0,
            theta: 25.0,
        }
    }
}

impl CoupledProblemConfig {
    /// DTV weights in block order: x, y, a (+θ), b (−θ), identity.
    pub fn dtv_weights(&self) -> [f64; 5] {
        [
            self.alpha_x,
            self.alpha_y,
            self.alpha_a,
            self.alpha_b,
            self.alpha_1,
        ]
    }

    /// Default blur widths tied to a low-resolution voxel size.
    pub fn with_voxel(mut self, voxel: [f64; 3]) -> Self {
        self.d1 = voxel;
        self.d2[2] = voxel[2];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.dtv_weights();
        if w.iter()
            .chain([&self.alpha_3])
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return Err(Error::Config(
                "alpha weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "alpha_x + alpha_y + alpha_a + alpha_b + alpha_1 must equal 1, got {sum}"
            )));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return Err(Error::Config("eps1 and eps2 must be > 0".into()));
        }
        if self
            .d1
            .iter()
            .chain(&self.d2)
            .chain(&self.dd)
            .any(|d| !(*d >= 0.0 && d.is_finite()))
        {
            return Err(Error::Config("blur widths must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::Config(format!(
                "ramp cutoff c must lie in [0, 1], got {}",
                self.c
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::Config("theta must be finite".into()));
        }
        Ok(())
    }
}

/// High-resolution quadratic refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TikhonovConfig {
    pub alpha_tik: f64,
    /// Blur width (cm FWHM); `None` uses the high-resolution voxel size.
    pub d: Option<[f64; 3]>,
    pub steps: usize,
    /// Refinement of the low-resolution grid per axis.
    pub factors: [usize; 3],
}

impl Default for TikhonovConfig {
    fn default() -> Self {
        Self {
            alpha_tik: 0.1,
            d: None,
            steps: 10,
            factors: [4, 4, 2],
        }
    }
}

impl TikhonovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_tik >= 0.0 && self.alpha_tik.is_finite()) {
            return Err(Error::Config(format!(
                "alpha_tik must be >= 0, got {}",
                self.alpha_tik
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("highres step count must be >= 1".into()));
        }
        if self.factors.contains(&0) {
            return Err(Error::Config("highres factors must be >= 1".into()));
        }
        if let Some(d) = self.d {
            if d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::Config("highres blur widths must be >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayConfig {
    /// Support threshold on the upsampled background image (cm⁻¹).
    pub threshold: f64,
    /// Depth blur (cm FWHM).
    pub dz: f64,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            dz: 0.085,
        }
    }
}

impl DisplayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "display threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if !(self.dz >= 0.0 && self.dz.is_finite()) {
            return Err(Error::Config(format!("dz must be >= 0, got {}", self.dz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub change_tol: f64,
    pub refresh_every: usize,
    pub power_tol: f64,
    pub power_max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        let stop = StoppingRule::default();
        let power = PowerSettings::default();
        Self {
            gamma: 5.0,
            beta: 100.0,
            rho: 1.75,
            max_iters: stop.max_iters,
            residual_tol: stop.residual_tol,
            change_tol: stop.change_tol,
            refresh_every: stop.refresh_every,
            power_tol: power.tol,
            power_max_iters: power.max_iters,
        }
    }
}

impl SolverParams {
    pub fn stopping(&self) -> StoppingRule {
        StoppingRule {
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            change_tol: self.change_tol,
            refresh_every: self.refresh_every,
        }
    }

    pub fn power(&self) -> PowerSettings {
        PowerSettings {
            tol: self.power_tol,
            max_iters: self.power_max_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0) {
            return Err(Error::Config(format!(
                "gamma must be >= 1, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.rho > 0.0 && self.rho < 2.0) {
            return Err(Error::Config(format!(
                "rho must lie in (0, 2), got {}",
                self.rho
            )));
        }
        if self.max_iters == 0 || self.power_max_iters == 0 {
            return Err(Error::Config("iteration limits must be >= 1".into()));
        }
        Ok(())
    }
}
