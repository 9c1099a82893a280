//! Proximal maps and projections for the separable terms of the objective.
//!
//! `prox_{tF}(v) = argmin_x t·F(x) + ½‖x − v‖²`. The conjugate proxes used
//! by the dual update are written in closed form rather than through the
//! Moreau identity, so the identity itself is a meaningful check.

use crate::error::{Error, Result};
use crate::grid::ImageVolume;

/// One separable term `F_i` of the dual-side objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparableFunction {
    /// `weight · ‖y‖₁`
    L1 { weight: f64 },
    /// Indicator of `‖y − center‖₂ ≤ radius`.
    L2Ball { center: Vec<f64>, radius: f64 },
    /// `weight/2 · ‖y − center‖₂²`
    SquaredL2 { center: Vec<f64>, weight: f64 },
}

impl SeparableFunction {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::param(format!(
                "l1 weight must be >= 0, got {weight}"
            )));
        }
        Ok(Self::L1 { weight })
    }

    pub fn l2_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param(format!(
                "ball radius must be >= 0, got {radius}"
            )));
        }
        Ok(Self::L2Ball { center, radius })
    }

    pub fn squared_l2(center: Vec<f64>, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::param(format!(
                "quadratic weight must be > 0, got {weight}"
            )));
        }
        Ok(Self::SquaredL2 { center, weight })
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Self::L2Ball { .. })
    }

    /// `y ↦ F(s·y)`, expressed as a function of the same kind.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::L1 { weight } => Self::L1 { weight: weight * s },
            Self::L2Ball { center, radius } => Self::L2Ball {
                center: center.iter().map(|c| c / s).collect(),
                radius: radius / s,
            },
            Self::SquaredL2 { center, weight } => Self::SquaredL2 {
                center: center.iter().map(|c| c / s).collect(),
                weight: weight * s * s,
            },
        }
    }

    /// Value of the function; indicators report 0 inside and ∞ outside.
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Self::L1 { weight } => weight * y.iter().map(|v| v.abs()).sum::<f64>(),
            Self::L2Ball { center, radius } => {
                if distance(y, center) <= radius * (1.0 + 1e-12) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::SquaredL2 { center, weight } => 0.5 * weight * distance(y, center).powi(2),
        }
    }

    /// `prox_{tF}(v)`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::param(format!("prox step must be > 0, got {t}")));
        }
        Ok(match self {
            Self::L1 { weight } => prox_l1(v, t * weight)?,
            Self::L2Ball { center, radius } => project_l2_ball(v, center, *radius)?,
            Self::SquaredL2 { center, weight } => {
                let a = t * weight;
                v.iter()
                    .zip(center)
                    .map(|(x, c)| (x + a * c) / (1.0 + a))
                    .collect()
            }
        })
    }

    /// `prox_{σF*}(y)` written into `out`.
    pub fn prox_conjugate_into(&self, y: &[f64], sigma: f64, out: &mut [f64]) {
        match self {
            Self::L1 { weight } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v.clamp(-weight, *weight);
                }
            }
            Self::L2Ball { center, radius } => {
                // F*(u) = <u, c> + r‖u‖, so the prox shrinks y − σc radially by σr
                let mut nrm2 = 0.0;
                for ((o, v), c) in out.iter_mut().zip(y).zip(center) {
                    *o = v - sigma * c;
                    nrm2 += *o * *o;
                }
                let nrm = nrm2.sqrt();
                let shrink = if nrm > 0.0 {
                    (1.0 - sigma * radius / nrm).max(0.0)
                } else {
                    0.0
                };
                out.iter_mut().for_each(|o| *o *= shrink);
            }
            Self::SquaredL2 { center, weight } => {
                let d = 1.0 + sigma / weight;
                for ((o, v), c) in out.iter_mut().zip(y).zip(center) {
                    *o = (v - sigma * c) / d;
                }
            }
        }
    }
}

/// `prox_{σF*}(y)`.
pub fn prox_conjugate(f: &SeparableFunction, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("dual step must be > 0, got {sigma}")));
    }
    let mut out = vec![0.0; y.len()];
    f.prox_conjugate_into(y, sigma, &mut out);
    Ok(out)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Soft threshold `sign(v)·max(|v| − t, 0)`.
pub fn prox_l1(v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {t}")));
    }
    Ok(v.iter().map(|&x| soft_threshold(x, t)).collect())
}

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Euclidean projection onto the ball `‖x − center‖ ≤ radius`. Independent of
/// any step size.
pub fn project_l2_ball(y: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) {
        return Err(Error::param(format!(
            "ball radius must be >= 0, got {radius}"
        )));
    }
    if y.len() != center.len() {
        return Err(Error::shape("ball center and point differ in length"));
    }
    let d = distance(y, center);
    if d <= radius {
        return Ok(y.to_vec());
    }
    let s = radius / d;
    Ok(y.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect())
}

/// Projection of three stacked vectors onto `f1 − f2 − f3 = 0`, in place.
pub fn project_coupling_slices(a1: &mut [f64], a2: &mut [f64], a3: &mut [f64]) {
    for ((x1, x2), x3) in a1.iter_mut().zip(a2.iter_mut()).zip(a3.iter_mut()) {
        let r = (*x1 - *x2 - *x3) / 3.0;
        *x1 -= r;
        *x2 += r;
        *x3 += r;
    }
}

/// Projection of `(a1, a2, a3)` onto `{f1 − f2 − f3 = 0}`.
pub fn project_coupling(
    a1: &ImageVolume,
    a2: &ImageVolume,
    a3: &ImageVolume,
) -> Result<(ImageVolume, ImageVolume, ImageVolume)> {
    if a1.grid() != a2.grid() || a1.grid() != a3.grid() {
        return Err(Error::shape("coupled volumes must share a grid"));
    }
    let (mut f1, mut f2, mut f3) = (a1.clone(), a2.clone(), a3.clone());
    project_coupling_slices(f1.data_mut(), f2.data_mut(), f3.data_mut());
    Ok((f1, f2, f3))
}
