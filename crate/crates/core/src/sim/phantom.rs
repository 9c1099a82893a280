use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageVolume, VolumeGrid};
use crate::operators::Axis;

/// A localized structure added on top of the background attenuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Inclusion {
    Sphere {
        center: [f64; 3],
        radius: f64,
        contrast: f64,
    },
    /// Cylinder of the given radius along `axis`, spanning `center ± half_length`.
    Rod {
        center: [f64; 3],
        radius: f64,
        half_length: f64,
        axis: Axis,
        contrast: f64,
    },
}

impl Inclusion {
    pub fn contrast(&self) -> f64 {
        match self {
            Self::Sphere { contrast, .. } | Self::Rod { contrast, .. } => *contrast,
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            Self::Sphere { center, radius, .. } => dist2(p, *center) <= radius * radius,
            Self::Rod {
                center,
                radius,
                half_length,
                axis,
                ..
            } => {
                let a = axis.index();
                let mut r2 = 0.0;
                for k in (0..3).filter(|&k| k != a) {
                    r2 += (p[k] - center[k]).powi(2);
                }
                r2 <= radius * radius && (p[a] - center[a]).abs() <= *half_length
            }
        }
    }

    /// Points on the boundary extremes, used for the containment check.
    fn extreme_points(&self) -> Vec<[f64; 3]> {
        let (center, ext) = match self {
            Self::Sphere { center, radius, .. } => (*center, [*radius; 3]),
            Self::Rod {
                center,
                radius,
                half_length,
                axis,
                ..
            } => {
                let mut e = [*radius; 3];
                e[axis.index()] = *half_length;
                (*center, e)
            }
        };
        let mut pts = Vec::new();
        for a in 0..3 {
            for s in [-1.0, 1.0] {
                let mut p = center;
                p[a] += s * ext[a];
                pts.push(p);
            }
        }
        pts
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Sphere {
                radius, contrast, ..
            } => *radius > 0.0 && contrast.is_finite(),
            Self::Rod {
                radius,
                half_length,
                contrast,
                ..
            } => *radius > 0.0 && *half_length > 0.0 && contrast.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("malformed inclusion {self:?}")))
        }
    }
}

/// Smooth random texture: a sum of plane waves with a common wavelength scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSpec {
    pub seed: u64,
    /// Peak amplitude (cm⁻¹).
    pub amplitude: f64,
    pub wavelength: f64,
    pub components: usize,
}

/// Compressed-breast phantom: half of an ellipsoid cut at the chest wall
/// plane `y = envelope_center[1]`, holding uniform tissue and inclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub envelope_center: [f64; 3],
    /// Ellipsoid half-widths (cm).
    pub envelope: [f64; 3],
    /// Tissue attenuation (cm⁻¹).
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
    pub texture: Option<TextureSpec>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            envelope_center: [0.0, 0.0, 0.0],
            envelope: [2.4, 2.5, 1.2],
            background: 0.5,
            inclusions: vec![
                Inclusion::Sphere {
                    center: [-0.8, 1.3, 0.0],
                    radius: 0.35,
                    contrast: 0.15,
                },
                Inclusion::Sphere {
                    center: [0.9, 0.9, 0.3],
                    radius: 0.25,
                    contrast: 0.2,
                },
                Inclusion::Rod {
                    center: [0.0, 0.8, -0.3],
                    radius: 0.1,
                    half_length: 0.6,
                    axis: Axis::X,
                    contrast: 0.25,
                },
            ],
            texture: None,
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

struct Texture {
    waves: Vec<([f64; 3], f64)>,
    scale: f64,
}

impl Texture {
    fn new(spec: &TextureSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let waves = (0..spec.components)
            .map(|_| {
                let k = 2.0 * PI / (spec.wavelength * rng.random_range(0.75..1.25));
                let cz: f64 = rng.random_range(-1.0..1.0);
                let phi = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - cz * cz).sqrt();
                let dir = [s * phi.cos(), s * phi.sin(), cz];
                (
                    [k * dir[0], k * dir[1], k * dir[2]],
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self {
            waves,
            scale: spec.amplitude / spec.components.max(1) as f64,
        }
    }

    fn eval(&self, p: [f64; 3]) -> f64 {
        self.scale
            * self
                .waves
                .iter()
                .map(|(k, ph)| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + ph).cos())
                .sum::<f64>()
    }
}

impl PhantomSpec {
    pub fn inside_envelope(&self, p: [f64; 3]) -> bool {
        let c = self.envelope_center;
        let r: f64 = (0..3)
            .map(|k| ((p[k] - c[k]) / self.envelope[k]).powi(2))
            .sum();
        r <= 1.0 && p[1] >= c[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.envelope.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("envelope half-widths must be > 0"));
        }
        if !(self.background >= 0.0) {
            return Err(Error::param("background attenuation must be >= 0"));
        }
        for (i, inc) in self.inclusions.iter().enumerate() {
            inc.validate()?;
            if self.background + inc.contrast() < 0.0 {
                return Err(Error::param(format!(
                    "inclusion {i} has negative attenuation"
                )));
            }
            if let Some(p) = inc
                .extreme_points()
                .into_iter()
                .find(|p| !self.inside_envelope(*p))
            {
                return Err(Error::param(format!(
                    "inclusion {i} reaches outside the envelope at {p:?}"
                )));
            }
        }
        if let Some(t) = &self.texture {
            if !(t.amplitude >= 0.0 && t.amplitude <= self.background && t.wavelength > 0.0) {
                return Err(Error::param(
                    "texture amplitude must lie in [0, background] with a positive wavelength",
                ));
            }
        }
        Ok(())
    }

    /// Attenuation at a point.
    fn value(&self, p: [f64; 3], texture: Option<&Texture>) -> f64 {
        if !self.inside_envelope(p) {
            return 0.0;
        }
        let mut v = self.background + texture.map_or(0.0, |t| t.eval(p));
        for inc in &self.inclusions {
            if inc.contains(p) {
                v += inc.contrast();
            }
        }
        v.max(0.0)
    }

    /// Same phantom without its inclusions.
    pub fn without_inclusions(&self) -> Self {
        Self {
            inclusions: Vec::new(),
            ..self.clone()
        }
    }
}

/// Voxelize a phantom with 2×2×2 supersampling per voxel.
pub fn make_phantom(spec: &PhantomSpec, grid: VolumeGrid) -> Result<ImageVolume> {
    voxelize(spec, grid, 2)
}

/// Voxelize with `n` samples per axis per voxel. `n = 1` samples voxel
/// centers only, which gives a piecewise-constant image without partial
/// volume.
pub fn voxelize(spec: &PhantomSpec, grid: VolumeGrid, n: usize) -> Result<ImageVolume> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("need at least one sample per voxel axis"));
    }
    let texture = spec.texture.as_ref().map(Texture::new);
    let offsets: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64 - 0.5).collect();
    let norm = 1.0 / (n * n * n) as f64;
    let s = grid.spacing;
    Ok(ImageVolume::from_fn(grid, |c| {
        let mut acc = 0.0;
        for oz in &offsets {
            for oy in &offsets {
                for ox in &offsets {
                    let p = [c[0] + ox * s[0], c[1] + oy * s[1], c[2] + oz * s[2]];
                    acc += spec.value(p, texture.as_ref());
                }
            }
        }
        acc * norm
    }))
}

/// Membership mask of each inclusion, evaluated at voxel centers.
pub fn inclusion_masks(spec: &PhantomSpec, grid: VolumeGrid) -> Vec<Vec<bool>> {
    spec.inclusions
        .iter()
        .map(|inc| {
            let mut m = Vec::with_capacity(grid.len());
            let [nx, ny, nz] = grid.dims;
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        m.push(inc.contains(grid.voxel_center(ix, iy, iz)));
                    }
                }
            }
            m
        })
        .collect()
}
