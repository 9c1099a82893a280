use crate::error::{Error, Result};
use crate::grid::{resample_volume, ImageVolume, ResampleMode};
use crate::operators::{GaussianBlur, LinearOperator};

use super::config::DisplayConfig;

/// Support mask of the background image and its mean level inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub support: Vec<bool>,
    pub level: f64,
}

/// Threshold `h2` and average it over the resulting support.
pub fn estimate_background(h2: &ImageVolume, threshold: f64) -> Result<Background> {
    let support: Vec<bool> = h2.data().iter().map(|&v| v > threshold).collect();
    let count = support.iter().filter(|&&s| s).count();
    if count == 0 {
        return Err(Error::param(format!(
            "no voxel of the background image exceeds the threshold {threshold}"
        )));
    }
    let sum: f64 = h2
        .data()
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(v, _)| v)
        .sum();
    Ok(Background {
        support,
        level: sum / count as f64,
    })
}

/// `G_z[dz]((h − h2) + b·h_sup)`.
pub fn compose_display(
    h: &ImageVolume,
    h2: &ImageVolume,
    bg: &Background,
    dz: f64,
) -> Result<ImageVolume> {
    if h.grid() != h2.grid() || bg.support.len() != h.data().len() {
        return Err(Error::shape("display inputs must share a grid"));
    }
    let pre: Vec<f64> = h
        .data()
        .iter()
        .zip(h2.data())
        .zip(&bg.support)
        .map(|((a, b), &s)| a - b + if s { bg.level } else { 0.0 })
        .collect();
    let blur = GaussianBlur::depth(*h.grid(), dz)?;
    ImageVolume::new(*h.grid(), blur.forward_vec(&pre))
}

/// Depth-blurred image without background removal.
pub fn depth_blur(h: &ImageVolume, dz: f64) -> Result<ImageVolume> {
    let blur = GaussianBlur::depth(*h.grid(), dz)?;
    ImageVolume::new(*h.grid(), blur.forward_vec(h.data()))
}

#[derive(Debug, Clone)]
pub struct DisplayResult {
    /// Background image upsampled to the grid of `h`.
    pub h2: ImageVolume,
    pub background: Background,
    pub h_disp: ImageVolume,
}

/// Upsample `f2` onto the grid of `h` and form the display image.
pub fn form_display(
    h: &ImageVolume,
    f2: &ImageVolume,
    cfg: &DisplayConfig,
) -> Result<DisplayResult> {
    cfg.validate()?;
    let factors = refinement_factors(f2, h)?;
    let h2 = resample_volume(f2, factors, ResampleMode::Up)?;
    if h2.grid() != h.grid() {
        return Err(Error::shape(
            "upsampled background does not land on the high-resolution grid",
        ));
    }
    let background = estimate_background(&h2, cfg.threshold)?;
    let h_disp = compose_display(h, &h2, &background, cfg.dz)?;
    Ok(DisplayResult {
        h2,
        background,
        h_disp,
    })
}

fn refinement_factors(coarse: &ImageVolume, fine: &ImageVolume) -> Result<[usize; 3]> {
    let (c, f) = (coarse.dims(), fine.dims());
    let mut out = [0; 3];
    for a in 0..3 {
        if c[a] == 0 || f[a] % c[a] != 0 {
            return Err(Error::shape(format!(
                "grid {:?} is not an integer refinement of {:?}",
                f, c
            )));
        }
        out[a] = f[a] / c[a];
    }
    Ok(out)
}
