use std::f64::consts::PI;
use std::sync::Arc;

use dbt_recon::geometry::ScanGeometry;
use dbt_recon::grid::{DetectorGrid, VolumeGrid};
use dbt_recon::operators::Axis;
use dbt_recon::pipeline::{preprocess_transmission, LOG_FLOOR};
use dbt_recon::sim::{
    make_phantom, mean_object_signal, simulate_acquisition, voxelize, ArtifactKind, ArtifactSpec,
    Inclusion, NoiseSpec, PhantomSpec,
};

fn big_envelope(inclusions: Vec<Inclusion>) -> PhantomSpec {
    PhantomSpec {
        envelope_center: [0.0, -1.0, 0.0],
        envelope: [5.0, 5.0, 5.0],
        background: 0.5,
        inclusions,
        texture: None,
    }
}

/// Volume occupied by the inclusions, measured from the voxelized excess.
fn inclusion_volume(spec: &PhantomSpec, grid: VolumeGrid, contrast: f64) -> f64 {
    let vol = voxelize(spec, grid, 2).unwrap();
    vol.data()
        .iter()
        .map(|v| (v - spec.background) / contrast)
        .sum::<f64>()
        * grid.voxel_volume()
}

#[test]
fn voxelized_sphere_and_rod_have_the_right_volume() {
    let grid = VolumeGrid::new([40, 40, 40], [0.05; 3], [0.0, 1.0, 0.0]).unwrap();
    let r = 0.6;
    let sphere = big_envelope(vec![Inclusion::Sphere {
        center: [0.0, 1.0, 0.0],
        radius: r,
        contrast: 0.2,
    }]);
    let v = inclusion_volume(&sphere, grid, 0.2);
    let want = 4.0 / 3.0 * PI * r.powi(3);
    assert!((v - want).abs() < 0.02 * want, "sphere {v} vs {want}");

    let (rr, half) = (0.3, 0.7);
    let rod = big_envelope(vec![Inclusion::Rod {
        center: [0.0, 1.0, 0.0],
        radius: rr,
        half_length: half,
        axis: Axis::Z,
        contrast: 0.25,
    }]);
    let v = inclusion_volume(&rod, grid, 0.25);
    let want = PI * rr * rr * 2.0 * half;
    assert!((v - want).abs() < 0.02 * want, "rod {v} vs {want}");
}

#[test]
fn envelope_is_cut_at_the_chest_wall() {
    let spec = PhantomSpec {
        inclusions: Vec::new(),
        ..PhantomSpec::default()
    };
    let grid = VolumeGrid::new([8, 8, 4], [0.2; 3], [0.0, 0.0, 0.0]).unwrap();
    let vol = voxelize(&spec, grid, 1).unwrap();
    for iz in 0..4 {
        for iy in 0..8 {
            for ix in 0..8 {
                let y = grid.voxel_center(ix, iy, iz)[1];
                assert_eq!(vol.get(ix, iy, iz) > 0.0, y >= 0.0);
            }
        }
    }
}

#[test]
fn inclusions_outside_the_envelope_are_rejected() {
    let spec = big_envelope(vec![Inclusion::Sphere {
        center: [4.9, 0.0, 0.0],
        radius: 0.5,
        contrast: 0.1,
    }]);
    assert!(spec.validate().is_err());
}

fn small_scan() -> (VolumeGrid, Arc<ScanGeometry>) {
    let grid = VolumeGrid::new([10, 6, 4], [0.4, 0.4, 0.5], [0.0, 1.2, 0.0]).unwrap();
    let det = DetectorGrid::new(20, 12, [0.4, 0.4]).unwrap();
    let geom = ScanGeometry::limited_arc(3, 30.0, 40.0, 42.0, det)
        .unwrap()
        .with_detector_offset([0.0, 2.4]);
    (grid, Arc::new(geom))
}

fn small_phantom() -> PhantomSpec {
    PhantomSpec {
        envelope_center: [0.0, 0.0, 0.0],
        envelope: [1.8, 2.0, 0.9],
        background: 0.5,
        inclusions: vec![Inclusion::Sphere {
            center: [0.3, 0.8, 0.0],
            radius: 0.4,
            contrast: 0.2,
        }],
        texture: None,
    }
}

#[test]
fn log_data_variance_follows_poisson_statistics() {
    let (grid, geom) = small_scan();
    let phantom = make_phantom(&small_phantom(), grid).unwrap();
    let i0 = 2e4;
    let noise = NoiseSpec { i0, poisson: true };
    let strip = (10, 12);
    let runs: Vec<Vec<f64>> = (0..200)
        .map(|seed| {
            let acq =
                simulate_acquisition(&phantom, &geom, &[], &noise, Some(strip), seed).unwrap();
            // known flat field, so the log data carry only the pixel's own noise
            acq.counts
                .data()
                .iter()
                .map(|c| -(c / i0).max(LOG_FLOOR).ln())
                .collect()
        })
        .collect();
    let clean = simulate_acquisition(&phantom, &geom, &[], &noise, Some(strip), 0)
        .unwrap()
        .clean;
    let n = runs.len() as f64;
    let (mut ratio_sum, mut count) = (0.0, 0);
    for (k, &g) in clean.data().iter().enumerate() {
        let mean = runs.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        ratio_sum += var / (g.exp() / i0);
        count += 1;
    }
    let ratio = ratio_sum / count as f64;
    assert!((ratio - 1.0).abs() < 0.1, "variance ratio {ratio}");
}

#[test]
fn noiseless_counts_preprocess_back_to_line_integrals() {
    let (grid, geom) = small_scan();
    let phantom = make_phantom(&small_phantom(), grid).unwrap();
    let noise = NoiseSpec {
        i0: 1e5,
        poisson: false,
    };
    let acq = simulate_acquisition(&phantom, &geom, &[], &noise, Some((10, 12)), 0).unwrap();
    // the phantom must leave the strip in air for this to be exact
    assert!(acq
        .clean
        .data()
        .iter()
        .enumerate()
        .all(|(k, v)| (k % 240) < 200 || *v == 0.0));
    let g = preprocess_transmission(&acq.counts, (10, 12), LOG_FLOOR).unwrap();
    for (a, b) in g.data().iter().zip(acq.clean.data()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn additive_artifact_has_the_requested_amplitude() {
    let (grid, geom) = small_scan();
    let phantom = make_phantom(&small_phantom(), grid).unwrap();
    let art = ArtifactSpec {
        kind: ArtifactKind::AdditiveSmooth,
        amplitude: 0.05,
        correlation_length: 4.0,
        seed: 5,
    };
    let noise = NoiseSpec {
        i0: 1e5,
        poisson: false,
    };
    let acq = simulate_acquisition(&phantom, &geom, &[art], &noise, Some((10, 12)), 0).unwrap();
    let peak = acq
        .artifact
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let want = 0.05 * mean_object_signal(&acq.clean);
    assert!(
        (peak - want).abs() < 1e-12 * want.max(1.0),
        "{peak} vs {want}"
    );
    let g = preprocess_transmission(&acq.counts, (10, 12), LOG_FLOOR).unwrap();
    for k in 0..g.len() {
        let want = acq.clean.data()[k] + acq.artifact.data()[k];
        assert!((g.data()[k] - want).abs() < 1e-9);
    }
}

#[test]
fn simulation_is_deterministic_and_thread_independent() {
    let (grid, geom) = small_scan();
    let phantom = make_phantom(&small_phantom(), grid).unwrap();
    let noise = NoiseSpec::default();
    let run = |threads: usize, seed: u64| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            simulate_acquisition(&phantom, &geom, &[], &noise, Some((10, 12)), seed).unwrap()
        })
    };
    let a = run(1, 3);
    let b = run(4, 3);
    assert_eq!(a.counts.data(), b.counts.data());
    let c = run(2, 4);
    assert_ne!(a.counts.data(), c.counts.data());
}
