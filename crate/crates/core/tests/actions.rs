use std::f64::consts::PI;

use pimc_core::estimators::{action_direct, action_renormalized, KernelSettings, NelsonKernels};
use pimc_core::kernels;
use pimc_core::paths::{sample_path, BrownianPath, PathSeed, TimeGrid};
use pimc_core::ModelParams;
use pimc_oracles::simpson;

#[test]
fn zero_path_direct_action_matches_double_integral() {
    let (eps, lambda, t) = (1.0, 1.0, 1.0);
    let p = ModelParams::nelson(3, 1.0, lambda, eps, t);
    let grid = TimeGrid::two_sided(t, 128).unwrap();
    let k = NelsonKernels::build(&p, &grid, true, false, &KernelSettings::default()).unwrap();
    let s = action_direct(&BrownianPath::zero(&grid, 3).unwrap(), &k).unwrap();
    // int int_{[-T,T]^2} W(0, t - s) = 2 int_0^{2T} (2T - u) W(0, u) du,
    // W(0, u) = 2 pi int_lambda^inf k e^{-eps k^2 - k u} dk
    let w0 = |u: f64| 2.0 * PI * simpson(|q| q * (-eps * q * q - q * u).exp(), lambda, 12.0, 4000);
    let want = 2.0 * simpson(|u| (2.0 * t - u) * w0(u), 0.0, 2.0 * t, 2000);
    assert!((s / want - 1.0).abs() < 1e-3, "{s} vs {want}");
}

#[test]
fn renormalized_action_reconstructs_direct_action_under_refinement() {
    let p = ModelParams::nelson(3, 1.0, 1.0, 0.5, 1.0);
    let settings = KernelSettings::default();
    let n_paths = 50;
    let levels = [16usize, 32, 64];
    let mut gaps = vec![0.0; levels.len()];
    for (l, &n) in levels.iter().enumerate() {
        let grid = TimeGrid::two_sided(1.0, n).unwrap();
        let k = NelsonKernels::build(&p, &grid, true, true, &settings).unwrap();
        let counterterm = 4.0 * p.t * k.rho_diag.unwrap();
        for idx in 0..n_paths {
            let path = sample_path(&grid, 3, PathSeed::new(3, idx)).unwrap();
            let direct = action_direct(&path, &k).unwrap();
            let ren = action_renormalized(&path, &k, 2.0).unwrap().total;
            gaps[l] += (direct - counterterm - ren).abs() / n_paths as f64;
        }
    }
    let per_halving = (gaps[0] / gaps[2]).sqrt();
    println!("mean gaps {gaps:?}, contraction per halving {per_halving:.3}");
    assert!(per_halving >= 1.2, "{gaps:?}");
}

#[test]
fn window_choice_matters_less_as_the_grid_refines() {
    let p = ModelParams::nelson(3, 1.0, 1.0, 0.25, 1.0);
    let settings = KernelSettings::default();
    let mut diffs = Vec::new();
    for n in [16usize, 32, 64] {
        let grid = TimeGrid::two_sided(1.0, n).unwrap();
        let k = NelsonKernels::build(&p, &grid, true, true, &settings).unwrap();
        let mut acc = 0.0;
        for idx in 0..8 {
            let path = sample_path(&grid, 3, PathSeed::new(4, idx)).unwrap();
            let a = action_renormalized(&path, &k, 0.5).unwrap().total;
            let b = action_renormalized(&path, &k, 2.0).unwrap().total;
            acc += (a - b).abs() / 8.0;
        }
        diffs.push(acc);
    }
    println!("tau = T/2 vs 2T mean |difference| {diffs:?}");
    assert!(diffs[2] < diffs[0], "{diffs:?}");
}

#[test]
fn rho_diag_is_the_counterterm_scale() {
    let p = ModelParams::nelson(3, 0.5, 1.0, 0.5, 1.0);
    let q = Default::default();
    let d = kernels::rho_diag(&p, &q).unwrap();
    assert_eq!(kernels::counterterm(&p, &q).unwrap(), -0.25 * d);
}
