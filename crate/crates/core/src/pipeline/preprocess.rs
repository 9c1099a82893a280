use crate::error::{Error, Result};
use crate::grid::ProjectionSet;

/// Default lower bound on the transmission ratio before the logarithm.
pub const LOG_FLOOR: f64 = 1e-6;

/// Convert raw counts to line integrals `g = −ln(I / Ī₀(u))`.
///
/// `Ī₀(u)` is the mean of `I` over detector rows `strip.0 .. strip.1` and
/// all views. Ratios below `floor` are clamped to it.
pub fn preprocess_transmission(
    counts: &ProjectionSet,
    strip: (usize, usize),
    floor: f64,
) -> Result<ProjectionSet> {
    let det = *counts.detector();
    let (lo, hi) = strip;
    if lo >= hi || hi > det.nv {
        return Err(Error::param(format!(
            "flat-field strip {lo}..{hi} is empty or outside 0..{}",
            det.nv
        )));
    }
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::param(format!(
            "log floor must lie in (0, 1), got {floor}"
        )));
    }
    let mut i0 = vec![0.0; det.nu];
    for view in 0..counts.nviews() {
        for iv in lo..hi {
            let row = counts.index(view, 0, iv);
            for (acc, &c) in i0.iter_mut().zip(&counts.data()[row..row + det.nu]) {
                *acc += c;
            }
        }
    }
    let n = ((hi - lo) * counts.nviews()) as f64;
    i0.iter_mut().for_each(|v| *v /= n);
    if let Some(u) = i0.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::param(format!(
            "flat-field estimate is not positive at column {u}"
        )));
    }

    let mut g = counts.clone();
    for row in g.data_mut().chunks_exact_mut(det.nu) {
        for (v, &f) in row.iter_mut().zip(&i0) {
            *v = -(*v / f).max(floor).ln();
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DetectorGrid;

    fn det() -> DetectorGrid {
        DetectorGrid::new(4, 6, [0.1, 0.1]).unwrap()
    }

    #[test]
    fn flat_field_gives_zero() {
        let mut counts = ProjectionSet::zeros(2, det());
        for view in 0..2 {
            for iv in 0..6 {
                for iu in 0..4 {
                    let i = counts.index(view, iu, iv);
                    counts.data_mut()[i] = 1000.0 + 100.0 * iu as f64;
                }
            }
        }
        let g = preprocess_transmission(&counts, (4, 6), LOG_FLOOR).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn floor_and_errors() {
        let mut counts = ProjectionSet::filled(1, det(), 10.0);
        counts.data_mut()[0] = 0.0;
        let g = preprocess_transmission(&counts, (5, 6), 1e-3).unwrap();
        assert!((g.data()[0] - 1e-3f64.ln().abs()).abs() < 1e-12);
        assert!(preprocess_transmission(&counts, (3, 3), LOG_FLOOR).is_err());
        assert!(preprocess_transmission(&counts, (5, 7), LOG_FLOOR).is_err());
        let zero = ProjectionSet::zeros(1, det());
        assert!(preprocess_transmission(&zero, (0, 6), LOG_FLOOR).is_err());
    }
}
