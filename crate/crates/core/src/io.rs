//! Raw array files with a JSON sidecar.
//!
//! Payload: little-endian IEEE-754 `f32`, no header. Volumes are x-fastest,
//! then y, then z; projection sets are u-fastest, then v, then view. The
//! sidecar shares the payload's stem with a `.json` extension.
//!
//! Values are held as `f64` in memory and narrowed to `f32` on write, so a
//! read followed by a write reproduces the payload bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DetectorGrid, ImageVolume, ProjectionSet, VolumeGrid};

pub const VOLUME_ORDER: &str = "x-fastest,y,z";
pub const PROJECTION_ORDER: &str = "u-fastest,v,view";
pub const DTYPE: &str = "f32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sidecar {
    Volume {
        dims: [usize; 3],
        spacing_cm: [f64; 3],
        origin_cm: [f64; 3],
        units: String,
        storage_order: String,
        dtype: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        provenance: BTreeMap<String, String>,
    },
    Projections {
        nviews: usize,
        detector: [usize; 2],
        pitch_cm: [f64; 2],
        units: String,
        storage_order: String,
        dtype: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        provenance: BTreeMap<String, String>,
    },
}

pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

fn encode(values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    bytes
}

fn decode(path: &Path, bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    if bytes.len() != expected * 4 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!(
                "payload has {} bytes, sidecar implies {}",
                bytes.len(),
                expected * 4
            ),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_pair(payload: &Path, sidecar: &Sidecar, values: &[f64]) -> Result<()> {
    if let Some(dir) = payload.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(payload, encode(values)).map_err(|e| Error::io(payload, e))?;
    let side = sidecar_path(payload);
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_sidecar(payload: &Path) -> Result<Sidecar> {
    let side = sidecar_path(payload);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: side,
        msg: e.to_string(),
    })
}

pub fn write_volume(
    payload: &Path,
    vol: &ImageVolume,
    provenance: &BTreeMap<String, String>,
) -> Result<()> {
    let g = vol.grid();
    let sidecar = Sidecar::Volume {
        dims: g.dims,
        spacing_cm: g.spacing,
        origin_cm: g.origin,
        units: "cm^-1".into(),
        storage_order: VOLUME_ORDER.into(),
        dtype: DTYPE.into(),
        provenance: provenance.clone(),
    };
    write_pair(payload, &sidecar, vol.data())
}

pub fn read_volume(payload: &Path) -> Result<ImageVolume> {
    let fmt = |msg: String| Error::Format {
        path: sidecar_path(payload),
        msg,
    };
    match read_sidecar(payload)? {
        Sidecar::Volume {
            dims,
            spacing_cm,
            origin_cm,
            storage_order,
            dtype,
            ..
        } => {
            if storage_order != VOLUME_ORDER || dtype != DTYPE {
                return Err(fmt(format!("unsupported layout {storage_order}/{dtype}")));
            }
            let grid =
                VolumeGrid::new(dims, spacing_cm, origin_cm).map_err(|e| fmt(e.to_string()))?;
            let bytes = fs::read(payload).map_err(|e| Error::io(payload, e))?;
            let data = decode(payload, &bytes, grid.len())?;
            ImageVolume::new(grid, data).map_err(|e| fmt(e.to_string()))
        }
        Sidecar::Projections { .. } => Err(fmt("expected a volume, found projections".into())),
    }
}

pub fn write_projections(
    payload: &Path,
    p: &ProjectionSet,
    units: &str,
    provenance: &BTreeMap<String, String>,
) -> Result<()> {
    let d = p.detector();
    let sidecar = Sidecar::Projections {
        nviews: p.nviews(),
        detector: [d.nu, d.nv],
        pitch_cm: d.pitch,
        units: units.into(),
        storage_order: PROJECTION_ORDER.into(),
        dtype: DTYPE.into(),
        provenance: provenance.clone(),
    };
    write_pair(payload, &sidecar, p.data())
}

pub fn read_projections(payload: &Path) -> Result<ProjectionSet> {
    let fmt = |msg: String| Error::Format {
        path: sidecar_path(payload),
        msg,
    };
    match read_sidecar(payload)? {
        Sidecar::Projections {
            nviews,
            detector,
            pitch_cm,
            storage_order,
            dtype,
            ..
        } => {
            if storage_order != PROJECTION_ORDER || dtype != DTYPE {
                return Err(fmt(format!("unsupported layout {storage_order}/{dtype}")));
            }
            let det = DetectorGrid::new(detector[0], detector[1], pitch_cm)
                .map_err(|e| fmt(e.to_string()))?;
            let bytes = fs::read(payload).map_err(|e| Error::io(payload, e))?;
            let data = decode(payload, &bytes, nviews * det.pixels())?;
            ProjectionSet::new(nviews, det, data).map_err(|e| fmt(e.to_string()))
        }
        Sidecar::Volume { .. } => Err(fmt("expected projections, found a volume".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.raw");
        let grid = VolumeGrid::new([3, 2, 2], [0.1, 0.2, 0.3], [1.0, -2.0, 0.5]).unwrap();
        let vol = ImageVolume::from_fn(grid, |p| (p[0] * 7.3 + p[1]).sin() / 3.0);
        write_volume(&path, &vol, &BTreeMap::new()).unwrap();
        let first = fs::read(&path).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.grid(), vol.grid());
        let again = dir.path().join("again.raw");
        write_volume(&again, &back, &BTreeMap::new()).unwrap();
        assert_eq!(first, fs::read(&again).unwrap());
        assert_eq!(read_volume(&again).unwrap(), back);
    }

    #[test]
    fn little_endian_x_fastest_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let grid = VolumeGrid::centered([2, 1, 1], [1.0; 3]).unwrap();
        let vol = ImageVolume::new(grid, vec![1.0, -2.5]).unwrap();
        write_volume(&path, &vol, &BTreeMap::new()).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[4..], &(-2.5f32).to_le_bytes());
    }

    #[test]
    fn kind_mismatch_and_truncation_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.raw");
        let det = DetectorGrid::new(4, 2, [0.1, 0.1]).unwrap();
        let p = ProjectionSet::filled(3, det, 0.25);
        write_projections(&path, &p, "line-integral", &BTreeMap::new()).unwrap();
        assert_eq!(read_projections(&path).unwrap(), p);
        assert!(matches!(read_volume(&path), Err(Error::Format { .. })));
        fs::write(&path, [0u8; 12]).unwrap();
        assert!(matches!(read_projections(&path), Err(Error::Format { .. })));
        assert!(matches!(
            read_volume(&dir.path().join("missing.raw")),
            Err(Error::Io { .. })
        ));
    }
}
