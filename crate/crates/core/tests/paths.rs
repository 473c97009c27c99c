use pimc_core::paths::{sample_path, PathSeed, TimeGrid};
use proptest::prelude::*;

/// Sample variance and its standard error `s^2 sqrt(2 / (n - 1))` (Gaussian data).
fn variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (v, v * (2.0 / (n - 1.0)).sqrt())
}

#[test]
fn endpoint_variances_follow_brownian_scaling() {
    let n = 100_000u64;
    let t = 1.0;
    let one = TimeGrid::one_sided(t, 4).unwrap();
    let two = TimeGrid::two_sided(t, 4).unwrap();
    let mut ends: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n as usize));
    let mut incs: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n as usize));
    for i in 0..n {
        let a = sample_path(&one, 3, PathSeed::new(2024, i)).unwrap();
        let b = sample_path(&two, 3, PathSeed::new(2024, i)).unwrap();
        let last = a.point(a.n_nodes() - 1);
        let inc = b.endpoint_increment();
        for c in 0..3 {
            ends[c].push(last[c]);
            incs[c].push(inc[c]);
        }
    }
    for c in 0..3 {
        let (v, se) = variance(&ends[c]);
        assert!((v - t).abs() < 3.0 * se, "B_T coordinate {c}: {v} +- {se}");
        let (v, se) = variance(&incs[c]);
        assert!(
            (v - 2.0 * t).abs() < 3.0 * se,
            "dB coordinate {c}: {v} +- {se}"
        );
    }
}

#[test]
fn halves_are_uncorrelated() {
    let g = TimeGrid::two_sided(1.0, 2).unwrap();
    let n = 20_000;
    let mut acc = 0.0;
    for i in 0..n {
        let p = sample_path(&g, 2, PathSeed::new(5, i)).unwrap();
        acc += p.point(0)[0] * p.point(4)[0];
    }
    let cov = acc / n as f64;
    // |cov| of independent N(0,1) products has standard error 1/sqrt(n)
    assert!(cov.abs() < 4.0 / (n as f64).sqrt(), "{cov}");
}

#[test]
fn increments_have_step_variance() {
    let g = TimeGrid::two_sided(0.5, 8).unwrap();
    let dt = g.dt();
    let mut xs = Vec::new();
    for i in 0..5_000 {
        let p = sample_path(&g, 2, PathSeed::new(6, i)).unwrap();
        for j in 0..g.n_nodes() - 1 {
            xs.push(p.point(j + 1)[0] - p.point(j)[0]);
        }
    }
    let (v, se) = variance(&xs);
    assert!((v - dt).abs() < 4.0 * se, "{v} vs {dt}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_keeps_coarse_nodes(master in any::<u64>(), index in 0u64..1_000_000, m in 1usize..6, levels in 1u32..4, d in 2usize..4) {
        let coarse = TimeGrid::two_sided(0.7, m).unwrap();
        let mut fine = coarse;
        for _ in 0..levels {
            fine = fine.refined();
        }
        let a = sample_path(&coarse, d, PathSeed::new(master, index)).unwrap();
        let b = sample_path(&fine, d, PathSeed::new(master, index)).unwrap();
        let stride = 1usize << levels;
        for i in 0..a.n_nodes() {
            prop_assert_eq!(a.point(i), b.point(i * stride));
        }
    }

    #[test]
    fn paths_do_not_depend_on_draw_order(master in any::<u64>(), index in 0u64..1000) {
        let g = TimeGrid::two_sided(1.0, 6).unwrap();
        let later = sample_path(&g, 3, PathSeed::new(master, index)).unwrap();
        for other in 0..3 {
            sample_path(&g, 3, PathSeed::new(master, index + 1 + other)).unwrap();
        }
        let again = sample_path(&g, 3, PathSeed::new(master, index)).unwrap();
        prop_assert_eq!(later.positions, again.positions);
    }

    #[test]
    fn one_sided_path_is_forward_half(master in any::<u64>(), index in 0u64..1000, n in 1usize..12) {
        let two = sample_path(&TimeGrid::two_sided(2.0, n).unwrap(), 2, PathSeed::new(master, index)).unwrap();
        let one = sample_path(&TimeGrid::one_sided(2.0, n).unwrap(), 2, PathSeed::new(master, index)).unwrap();
        for i in 0..=n {
            prop_assert_eq!(one.point(i), two.point(n + i));
        }
        prop_assert_eq!(one.point(0), &[0.0, 0.0][..]);
    }

    #[test]
    fn grid_landmarks_are_exact(t in 0.01f64..50.0, n in 1usize..500) {
        let g = TimeGrid::two_sided(t, n).unwrap();
        prop_assert_eq!(g.time(0), -t);
        prop_assert_eq!(g.time(n), 0.0);
        prop_assert_eq!(g.time(2 * n), t);
    }
}
