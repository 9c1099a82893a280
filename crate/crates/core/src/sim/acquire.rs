use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::grid::{DetectorGrid, ImageVolume, ProjectionSet};
use crate::operators::{GaussianBlur, LinearOperator, XRayTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    /// Smooth field added to the line integrals of every view.
    AdditiveSmooth,
    /// Linear fluence ramp along `u`, multiplying the transmitted counts.
    FluenceGradient,
}

/// A low-frequency perturbation of the measured data.
///
/// Both kinds fade to zero over the rows just before the flat-field strip,
/// so the air estimate stays clean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSpec {
    pub kind: ArtifactKind,
    /// Peak size. Additive: fraction of the mean object line integral.
    /// Fluence: fractional fluence change at the detector edges.
    pub amplitude: f64,
    /// Shortest wavelength of the additive field (cm).
    #[serde(default = "default_correlation")]
    pub correlation_length: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_correlation() -> f64 {
    4.0
}

impl ArtifactSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param(format!(
                "artifact amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if self.kind == ArtifactKind::FluenceGradient && self.amplitude >= 1.0 {
            return Err(Error::param("fluence gradient amplitude must be < 1"));
        }
        if !(self.correlation_length > 0.0) {
            return Err(Error::param("artifact correlation length must be > 0"));
        }
        Ok(())
    }
}

/// Photon statistics of the simulated scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Unattenuated counts per pixel.
    pub i0: f64,
    pub poisson: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            i0: 1e5,
            poisson: true,
        }
    }
}

/// Row weights: 1 away from the strip, a cosine fade over `margin` rows
/// before it, 0 from the strip onward.
pub fn strip_taper(nv: usize, strip: Option<(usize, usize)>) -> Vec<f64> {
    let Some((lo, _)) = strip else {
        return vec![1.0; nv];
    };
    let margin = (nv / 16).max(4).min(lo);
    (0..nv)
        .map(|iv| {
            if iv >= lo {
                0.0
            } else if iv + margin < lo {
                1.0
            } else {
                let t = (lo - iv) as f64 / (margin + 1) as f64;
                0.5 - 0.5 * (PI * t).cos()
            }
        })
        .collect()
}

/// Unit-peak smooth field over the detector, tapered toward the strip.
pub fn smooth_field(
    det: &DetectorGrid,
    spec: &ArtifactSpec,
    strip: Option<(usize, usize)>,
) -> Vec<f64> {
    let taper = strip_taper(det.nv, strip);
    let mut out = vec![0.0; det.pixels()];
    match spec.kind {
        ArtifactKind::FluenceGradient => {
            for iv in 0..det.nv {
                for iu in 0..det.nu {
                    let s = 2.0 * (iu as f64 + 0.5) / det.nu as f64 - 1.0;
                    out[iu + det.nu * iv] = s * taper[iv];
                }
            }
        }
        ArtifactKind::AdditiveSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let waves: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    let k = 2.0 * PI / (spec.correlation_length * rng.random_range(1.0..2.0));
                    let dir = rng.random_range(0.0..2.0 * PI);
                    let amp = rng.random_range(0.5..1.0);
                    (
                        k * dir.cos(),
                        k * dir.sin(),
                        rng.random_range(0.0..2.0 * PI),
                        amp,
                    )
                })
                .collect();
            for iv in 0..det.nv {
                let v = (iv as f64 + 0.5 - det.nv as f64 / 2.0) * det.pitch[1];
                for iu in 0..det.nu {
                    let u = (iu as f64 + 0.5 - det.nu as f64 / 2.0) * det.pitch[0];
                    let s: f64 = waves
                        .iter()
                        .map(|(ku, kv, ph, a)| a * (ku * u + kv * v + ph).cos())
                        .sum();
                    out[iu + det.nu * iv] = s * taper[iv];
                }
            }
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out
}

/// Mean line integral over pixels that see the object.
pub fn mean_object_signal(g: &ProjectionSet) -> f64 {
    let (sum, n) = g
        .data()
        .iter()
        .filter(|&&v| v > 1e-9)
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct Acquisition {
    /// Detector counts.
    pub counts: ProjectionSet,
    /// Noise- and artifact-free line integrals.
    pub clean: ProjectionSet,
    /// Total artifact expressed as an additive change of the line integrals.
    pub artifact: ProjectionSet,
}

/// Simulate detector counts for a phantom: line integrals, artifacts,
/// Beer-Lambert attenuation, then optional Poisson noise.
///
/// The noise stream of each view is seeded from `(seed, view)`, so results
/// do not depend on the thread count.
pub fn simulate_acquisition(
    phantom: &ImageVolume,
    geom: &Arc<ScanGeometry>,
    artifacts: &[ArtifactSpec],
    noise: &NoiseSpec,
    strip: Option<(usize, usize)>,
    seed: u64,
) -> Result<Acquisition> {
    if !(noise.i0 > 0.0 && noise.i0.is_finite()) {
        return Err(Error::param(format!("I0 must be > 0, got {}", noise.i0)));
    }
    for a in artifacts {
        a.validate()?;
    }
    let xray = XRayTransform::new(*phantom.grid(), geom.clone())?;
    let clean = ProjectionSet::new(
        geom.nviews(),
        geom.detector,
        xray.forward_vec(phantom.data()),
    )?;
    let det = geom.detector;
    let npix = det.pixels();
    let mean_signal = mean_object_signal(&clean);

    // per-pixel additive change of the line integrals, shared by all views
    let mut shift = vec![0.0; npix];
    for a in artifacts {
        let s = smooth_field(&det, a, strip);
        match a.kind {
            ArtifactKind::AdditiveSmooth => {
                let scale = a.amplitude * mean_signal;
                shift.iter_mut().zip(&s).for_each(|(t, v)| *t += scale * v);
            }
            ArtifactKind::FluenceGradient => {
                shift
                    .iter_mut()
                    .zip(&s)
                    .for_each(|(t, v)| *t -= (1.0 + a.amplitude * v).ln());
            }
        }
    }
    let mut artifact = ProjectionSet::zeros(geom.nviews(), det);
    artifact
        .data_mut()
        .chunks_exact_mut(npix)
        .for_each(|view| view.copy_from_slice(&shift));

    let mut counts = clean.clone();
    let i0 = noise.i0;
    counts
        .data_mut()
        .par_chunks_mut(npix)
        .zip(artifact.data().par_chunks(npix))
        .enumerate()
        .try_for_each(|(view, (c, a))| -> Result<()> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(view as u64 + 1);
            for (v, s) in c.iter_mut().zip(a) {
                let mean = i0 * (-(*v + s)).exp();
                *v = if noise.poisson {
                    Poisson::new(mean)
                        .map_err(|e| Error::param(format!("Poisson mean {mean}: {e}")))?
                        .sample(&mut rng)
                } else {
                    mean
                };
            }
            Ok(())
        })?;
    Ok(Acquisition {
        counts,
        clean,
        artifact,
    })
}

/// Noiseless line integrals `X G[d1] f` from the reconstruction's own
/// forward model, returned with the ground truth.
pub fn inverse_crime_dataset(
    truth: &ImageVolume,
    geom: Arc<ScanGeometry>,
    d1: [f64; 3],
) -> Result<(ProjectionSet, ImageVolume)> {
    let grid = *truth.grid();
    let blurred = GaussianBlur::volume(grid, d1)?.forward_vec(truth.data());
    let xray = XRayTransform::new(grid, geom.clone())?;
    let g = ProjectionSet::new(geom.nviews(), geom.detector, xray.forward_vec(&blurred))?;
    Ok((g, truth.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taper_profile() {
        let t = strip_taper(64, Some((56, 64)));
        assert!(t[..48].iter().all(|&v| v == 1.0));
        assert!(t[56..].iter().all(|&v| v == 0.0));
        assert!(t[48..56].windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(strip_taper(5, None), vec![1.0; 5]);
    }

    #[test]
    fn fields_have_unit_peak_and_vanish_on_strip() {
        let det = DetectorGrid::new(32, 16, [0.1, 0.1]).unwrap();
        for kind in [ArtifactKind::AdditiveSmooth, ArtifactKind::FluenceGradient] {
            let spec = ArtifactSpec {
                kind,
                amplitude: 0.05,
                correlation_length: 2.0,
                seed: 3,
            };
            let f = smooth_field(&det, &spec, Some((12, 16)));
            let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((peak - 1.0).abs() < 1e-12);
            assert!(f[12 * 32..].iter().all(|&v| v == 0.0));
        }
    }
}
