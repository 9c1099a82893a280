use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageVolume;
use crate::operators::Axis;

/// A 2D cut through a volume, row-major with `width` samples per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    /// Sample spacing along the rows (cm).
    pub pitch: f64,
}

/// The plane `axis = index`. In-plane axes keep their volume order, so a
/// z-slice has x along rows and y down the columns.
pub fn extract_slice(vol: &ImageVolume, axis: Axis, index: usize) -> Result<Slice> {
    let [nx, ny, nz] = vol.dims();
    let n = vol.dims()[axis.index()];
    if index >= n {
        return Err(Error::param(format!(
            "slice index {index} out of range 0..{n} along {axis:?}"
        )));
    }
    let s = vol.spacing();
    let (width, height, pitch) = match axis {
        Axis::Z => (nx, ny, s[0]),
        Axis::Y => (nx, nz, s[0]),
        Axis::X => (ny, nz, s[1]),
    };
    let mut data = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            data.push(match axis {
                Axis::Z => vol.get(c, r, index),
                Axis::Y => vol.get(c, index, r),
                Axis::X => vol.get(index, c, r),
            });
        }
    }
    debug_assert!(nx * ny * nz > 0);
    Ok(Slice {
        width,
        height,
        data,
        pitch,
    })
}

/// Linear window mapping: `lo` and below to 0, `hi` and above to 65535.
pub fn window_to_u16(v: f64, lo: f64, hi: f64) -> u16 {
    if !(hi > lo) {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 65535.0).round() as u16
}

/// Binary 16-bit portable graymap (big-endian samples).
pub fn encode_pgm(slice: &Slice, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", slice.width, slice.height).into_bytes();
    for &v in &slice.data {
        out.extend_from_slice(&window_to_u16(v, lo, hi).to_be_bytes());
    }
    out
}

/// Parse a binary 16-bit PGM back to its dimensions and samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = |m: &str| Error::param(format!("not a 16-bit PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("wrong magic or depth"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let body = bytes.get(pos..).ok_or_else(|| bad("missing body"))?;
    if body.len() != 2 * w * h {
        return Err(bad("body length"));
    }
    Ok((
        w,
        h,
        body.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    ))
}

pub fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        })
}

/// Values along row `row` of one or more slices, as tab-separated text with
/// a position column in cm (centered on the slice).
pub fn profile_tsv(slices: &[(&str, &Slice)], row: usize) -> Result<String> {
    let first = slices
        .first()
        .ok_or_else(|| Error::param("profile needs a slice"))?
        .1;
    if row >= first.height {
        return Err(Error::param(format!(
            "profile row {row} out of range 0..{}",
            first.height
        )));
    }
    if slices
        .iter()
        .any(|(_, s)| s.width != first.width || s.height != first.height)
    {
        return Err(Error::shape("profile slices differ in size"));
    }
    let mut s = String::from("position_cm");
    for (name, _) in slices {
        let _ = write!(s, "\t{name}");
    }
    s.push('\n');
    for c in 0..first.width {
        let pos = (c as f64 + 0.5 - first.width as f64 / 2.0) * first.pitch;
        let _ = write!(s, "{pos:.6}");
        for (_, sl) in slices {
            let _ = write!(s, "\t{:.9e}", sl.data[row * sl.width + c]);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
