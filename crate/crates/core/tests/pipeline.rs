use dbt_recon::grid::{ImageVolume, ProjectionSet, VolumeGrid};
use dbt_recon::operators::{GaussianBlur, LinearOperator, XRayTransform};
use dbt_recon::pipeline::{
    build_coupled_problem, compose_display, estimate_background, form_display,
    CoupledProblemConfig, DisplayConfig, TikhonovConfig, TikhonovProblem, BLOCK_NAMES,
};
use dbt_recon::verify::small_setup;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(grid: VolumeGrid, rng: &mut ChaCha8Rng) -> ImageVolume {
    ImageVolume::new(
        grid,
        (0..grid.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    )
    .unwrap()
}

fn tikhonov() -> (TikhonovProblem, ImageVolume) {
    let (grid, geom) = small_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let truth = random_volume(grid, &mut rng);
    let xray = XRayTransform::new(grid, geom.clone()).unwrap();
    let g =
        ProjectionSet::new(geom.nviews(), geom.detector, xray.forward_vec(truth.data())).unwrap();
    let h0 = random_volume(grid, &mut rng);
    let cfg = TikhonovConfig {
        alpha_tik: 0.1,
        d: Some([0.3, 0.3, 0.4]),
        steps: 10,
        factors: [1, 1, 1],
    };
    (TikhonovProblem::new(&g, geom, &h0, &cfg, 1.0).unwrap(), h0)
}

#[test]
fn highres_gradient_matches_central_differences() {
    let (problem, h0) = tikhonov();
    let h = h0.data().to_vec();
    let grad = problem.gradient(&h);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..5 {
        let dir: Vec<f64> = (0..h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let step = 1e-3;
        let shifted = |s: f64| -> Vec<f64> { h.iter().zip(&dir).map(|(a, d)| a + s * d).collect() };
        let fd =
            (problem.objective(&shifted(step)) - problem.objective(&shifted(-step))) / (2.0 * step);
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        assert!(
            (fd - analytic).abs() < 1e-5 * analytic.abs(),
            "fd {fd} vs {analytic}"
        );
    }
}

#[test]
fn highres_objective_never_increases() {
    let (problem, _) = tikhonov();
    let (_, history) = problem.descend(10);
    assert_eq!(history.len(), 11);
    for w in history.windows(2) {
        assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
    }
    assert!(history[10] < history[0]);
}

#[test]
fn coupled_problem_has_thirteen_blocks_on_three_columns() {
    let (grid, geom) = small_setup();
    let g = ProjectionSet::zeros(geom.nviews(), geom.detector);
    let cfg = CoupledProblemConfig::default().with_voxel(grid.spacing);
    let p = build_coupled_problem(&g, geom, grid, &cfg).unwrap();
    assert_eq!(p.blocks.len(), 13);
    let names: Vec<&str> = p.blocks.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, BLOCK_NAMES);
    let cols: Vec<usize> = p.blocks.iter().map(|b| b.column).collect();
    assert_eq!(cols, [0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2]);
    let xray: Vec<bool> = p.blocks.iter().map(|b| b.xray).collect();
    assert!(xray[0] && xray[6] && xray.iter().filter(|&&x| x).count() == 2);
}

#[test]
fn dtv_weights_must_sum_to_one() {
    let (grid, geom) = small_setup();
    let g = ProjectionSet::zeros(geom.nviews(), geom.detector);
    let cfg = CoupledProblemConfig {
        alpha_x: 0.9,
        ..CoupledProblemConfig::default()
    };
    assert!(build_coupled_problem(&g, geom, grid, &cfg).is_err());
}

#[test]
fn display_of_an_upsampled_background_restores_its_level() {
    // h equal to the upsampled background: the display is the level on the
    // support and zero elsewhere, before the depth blur
    let coarse = VolumeGrid::centered([3, 3, 2], [0.4, 0.4, 0.4]).unwrap();
    let f2 = ImageVolume::from_fn(coarse, |p| if p[0] > -0.3 { 0.45 } else { 0.02 });
    let fine = coarse.refined([2, 2, 2]).unwrap();
    let probe = ImageVolume::zeros(fine);
    let cfg = DisplayConfig {
        threshold: 0.1,
        dz: 0.0,
    };
    let h2 = form_display(&probe, &f2, &cfg).unwrap().h2;
    let d = form_display(&h2, &f2, &cfg).unwrap();
    for (v, s) in d.h_disp.data().iter().zip(&d.background.support) {
        let want = if *s { d.background.level } else { 0.0 };
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn display_depth_blur_is_the_z_convolution() {
    let grid = VolumeGrid::centered([2, 2, 6], [0.1, 0.1, 0.05]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let h = random_volume(grid, &mut rng);
    let h2 = random_volume(grid, &mut rng);
    let bg = estimate_background(&h2, 0.5).unwrap();
    let dz = 0.085;
    let got = compose_display(&h, &h2, &bg, dz).unwrap();
    let pre = compose_display(&h, &h2, &bg, 0.0).unwrap();
    let want = GaussianBlur::volume(grid, [0.0, 0.0, dz])
        .unwrap()
        .forward_vec(pre.data());
    for (a, b) in got.data().iter().zip(&want) {
        assert!((a - b).abs() < 1e-14);
    }
}
