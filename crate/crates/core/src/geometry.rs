//! Limited-arc cone-beam scan geometry.
//!
//! The isocenter is the coordinate origin. Sources sweep an arc in the
//! xz-plane, with `z` pointing from the detector toward the source at the
//! central view. The detector long axis `u` is parallel to `x`, the scan
//! direction, and `v` is parallel to `y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DetectorGrid, VolumeGrid};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Placement of the detector plane for one view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorFrame {
    pub center: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
}

impl DetectorFrame {
    pub fn normal(&self) -> Vec3 {
        cross(self.u_axis, self.v_axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub angle_deg: f64,
    pub source: Vec3,
    pub detector: DetectorFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    pub arc_deg: f64,
    pub source_to_isocenter: f64,
    pub source_to_detector: f64,
    pub detector: DetectorGrid,
    pub views: Vec<View>,
}

impl ScanGeometry {
    /// Evenly spaced views over `arc_deg`, symmetric about 0°, with a
    /// stationary detector perpendicular to the central ray.
    pub fn limited_arc(
        nviews: usize,
        arc_deg: f64,
        source_to_isocenter: f64,
        source_to_detector: f64,
        detector: DetectorGrid,
    ) -> Result<Self> {
        if nviews == 0 {
            return Err(Error::param("scan needs at least one view"));
        }
        if !(arc_deg >= 0.0 && arc_deg < 180.0) {
            return Err(Error::param(format!(
                "arc must lie in [0, 180) degrees, got {arc_deg}"
            )));
        }
        if !(source_to_isocenter > 0.0 && source_to_detector > source_to_isocenter) {
            return Err(Error::Geometry(format!(
                "need 0 < source-to-isocenter ({source_to_isocenter}) < source-to-detector ({source_to_detector})"
            )));
        }
        let frame = DetectorFrame {
            center: [0.0, 0.0, -(source_to_detector - source_to_isocenter)],
            u_axis: [1.0, 0.0, 0.0],
            v_axis: [0.0, 1.0, 0.0],
        };
        let views = (0..nviews)
            .map(|k| {
                let angle_deg = if nviews == 1 {
                    0.0
                } else {
                    -arc_deg / 2.0 + arc_deg * k as f64 / (nviews - 1) as f64
                };
                let t = angle_deg.to_radians();
                View {
                    angle_deg,
                    source: [
                        source_to_isocenter * t.sin(),
                        0.0,
                        source_to_isocenter * t.cos(),
                    ],
                    detector: frame,
                }
            })
            .collect();
        Ok(Self {
            arc_deg,
            source_to_isocenter,
            source_to_detector,
            detector,
            views,
        })
    }

    /// Move the detector within its plane by `[du, dv]` (cm).
    pub fn with_detector_offset(mut self, offset: [f64; 2]) -> Self {
        for view in &mut self.views {
            let f = &mut view.detector;
            for a in 0..3 {
                f.center[a] += offset[0] * f.u_axis[a] + offset[1] * f.v_axis[a];
            }
        }
        self
    }

    pub fn nviews(&self) -> usize {
        self.views.len()
    }

    /// `nviews * nu * nv`.
    pub fn data_len(&self) -> usize {
        self.views.len() * self.detector.pixels()
    }

    pub fn pixel_center(&self, view: usize, iu: usize, iv: usize) -> Vec3 {
        let frame = &self.views[view].detector;
        let u = (iu as f64 + 0.5 - self.detector.nu as f64 / 2.0) * self.detector.pitch[0];
        let v = (iv as f64 + 0.5 - self.detector.nv as f64 / 2.0) * self.detector.pitch[1];
        [
            frame.center[0] + u * frame.u_axis[0] + v * frame.v_axis[0],
            frame.center[1] + u * frame.u_axis[1] + v * frame.v_axis[1],
            frame.center[2] + u * frame.u_axis[2] + v * frame.v_axis[2],
        ]
    }

    /// Same views with the detector pixels binned by `factors`.
    pub fn binned(&self, factors: [usize; 2]) -> Result<Self> {
        Ok(Self {
            detector: self.detector.binned(factors)?,
            ..self.clone()
        })
    }

    /// Every ray segment from a source to its detector must cross the whole
    /// volume: each voxel corner lies strictly between the source and the
    /// detector plane.
    pub fn check_volume(&self, grid: &VolumeGrid) -> Result<()> {
        let (lo, hi) = grid.bounds();
        for (k, view) in self.views.iter().enumerate() {
            let n = view.detector.normal();
            let n_len = dot(n, n).sqrt();
            if !(n_len > 0.0) {
                return Err(Error::Geometry(format!(
                    "view {k}: detector axes are parallel"
                )));
            }
            let h_src = dot(sub(view.source, view.detector.center), n);
            if h_src == 0.0 {
                return Err(Error::Geometry(format!(
                    "view {k}: source lies on the detector plane"
                )));
            }
            let inside = (0..3).all(|a| view.source[a] >= lo[a] && view.source[a] <= hi[a]);
            if inside {
                return Err(Error::Geometry(format!(
                    "view {k}: source is inside the volume"
                )));
            }
            for corner in 0..8 {
                let p = [
                    if corner & 1 == 0 { lo[0] } else { hi[0] },
                    if corner & 2 == 0 { lo[1] } else { hi[1] },
                    if corner & 4 == 0 { lo[2] } else { hi[2] },
                ];
                let h = dot(sub(p, view.detector.center), n) / h_src;
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::Geometry(format!(
                        "view {k}: volume corner {p:?} is not between source and detector"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det() -> DetectorGrid {
        DetectorGrid::new(64, 32, [0.136, 0.136]).unwrap()
    }

    #[test]
    fn views_symmetric_and_even() {
        let g = ScanGeometry::limited_arc(25, 50.0, 60.0, 63.0, det()).unwrap();
        assert_eq!(g.nviews(), 25);
        assert!((g.views[0].angle_deg + 25.0).abs() < 1e-12);
        assert!((g.views[24].angle_deg - 25.0).abs() < 1e-12);
        assert!(g.views[12].angle_deg.abs() < 1e-12);
        for k in 1..25 {
            let step = g.views[k].angle_deg - g.views[k - 1].angle_deg;
            assert!((step - 50.0 / 24.0).abs() < 1e-12);
        }
        for v in &g.views {
            assert_eq!(v.source[1], 0.0);
            let r = (v.source[0].powi(2) + v.source[2].powi(2)).sqrt();
            assert!((r - 60.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pixel_centers_are_centered() {
        let g = ScanGeometry::limited_arc(1, 0.0, 60.0, 63.0, det()).unwrap();
        let a = g.pixel_center(0, 31, 15);
        let b = g.pixel_center(0, 32, 16);
        assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        assert_eq!(a[2], -3.0);
    }

    #[test]
    fn rejects_source_inside_volume() {
        let g = ScanGeometry::limited_arc(3, 50.0, 2.0, 4.0, det()).unwrap();
        let grid = VolumeGrid::centered([40, 40, 40], [0.2, 0.2, 0.2]).unwrap();
        assert!(matches!(g.check_volume(&grid), Err(Error::Geometry(_))));
        let small = VolumeGrid::centered([4, 4, 4], [0.1, 0.1, 0.1]).unwrap();
        assert!(g.check_volume(&small).is_ok());
    }

    #[test]
    fn rejects_volume_through_detector() {
        let g = ScanGeometry::limited_arc(3, 50.0, 60.0, 61.0, det()).unwrap();
        let grid = VolumeGrid::centered([10, 10, 10], [0.3, 0.3, 0.3]).unwrap();
        assert!(g.check_volume(&grid).is_err());
    }
}
