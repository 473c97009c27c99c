//! Brute-force reference values for testing the pimc kernels and estimators.
//!
//! Nothing here shares code with `pimc-core`: kernels are computed as plain
//! `d`-dimensional Cartesian lattice sums of their Fourier integrals
//! `int_{|k| >= lambda} f(|k|) e^{-i k.x} d^dk`, and one-dimensional integrals
//! use composite Simpson rules.

use rayon::prelude::*;

/// The radial Fourier factor `f(|k|)` of each kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `e^{-eps k^2 - k|t|} / (2k)`
    W,
    /// `e^{-eps k^2 - k|t|} / (2k) * 1 / (k + k^2/2)`
    Rho,
    /// Radial derivative of `Rho`.
    RhoDr,
    /// `e^{-eps k^2} e^{-|t|} / (2k^2)` (three dimensions).
    PolaronW,
}

impl Kernel {
    pub fn factor(self, k: f64, eps: f64, t: f64) -> f64 {
        let t = t.abs();
        match self {
            Kernel::W => (-eps * k * k - k * t).exp() / (2.0 * k),
            Kernel::Rho | Kernel::RhoDr => {
                (-eps * k * k - k * t).exp() / (2.0 * k) / (k + 0.5 * k * k)
            }
            Kernel::PolaronW => (-eps * k * k - t).exp() / (2.0 * k * k),
        }
    }
}

/// Lattice resolution: spacing `h`, cube half-width `k_max`, and how many
/// times cells crossed by the sphere `|k| = lambda` are bisected.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub h: f64,
    pub k_max: f64,
    pub cut_depth: u32,
}

impl Lattice {
    /// A lattice adequate for `eps >= 0.25` at roughly `1e-4` relative accuracy.
    pub fn for_eps(d: usize, eps: f64) -> Self {
        Lattice {
            h: if d == 3 { 0.05 } else { 0.02 },
            k_max: (30.0 / eps).sqrt(),
            cut_depth: if d == 3 { 4 } else { 10 },
        }
    }
}

/// `int_{|k| >= lambda} f(|k|) e^{-i k.x} d^dk` at `x = r * direction` (for
/// `RhoDr`, the derivative of that integral along `direction`).
///
/// The cutoff sphere spoils the spectral accuracy of the uniform midpoint
/// rule and leaves an `O(h^2)` error; it is removed by Richardson
/// extrapolation between spacings `h` and `2h` (same finest resolution on
/// the sphere).
#[allow(clippy::too_many_arguments)]
pub fn lattice_kernel(
    kernel: Kernel,
    d: usize,
    eps: f64,
    lambda: f64,
    r: f64,
    t: f64,
    direction: &[f64],
    lat: Lattice,
) -> f64 {
    let fine = lattice_sum(kernel, d, eps, lambda, r, t, direction, lat);
    let coarse = Lattice {
        h: 2.0 * lat.h,
        cut_depth: lat.cut_depth + 1,
        ..lat
    };
    let coarse = lattice_sum(kernel, d, eps, lambda, r, t, direction, coarse);
    (4.0 * fine - coarse) / 3.0
}

/// Plain midpoint lattice sum behind [`lattice_kernel`].
#[allow(clippy::too_many_arguments)]
pub fn lattice_sum(
    kernel: Kernel,
    d: usize,
    eps: f64,
    lambda: f64,
    r: f64,
    t: f64,
    direction: &[f64],
    lat: Lattice,
) -> f64 {
    assert!(d == 2 || d == 3, "d must be 2 or 3");
    assert_eq!(direction.len(), d);
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut e = [0.0; 3];
    for a in 0..d {
        e[a] = direction[a] / norm;
    }
    let x = [e[0] * r, e[1] * r, e[2] * r];
    let term = |k: &[f64; 3]| -> f64 {
        let q = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        if q < lambda || q == 0.0 {
            return 0.0;
        }
        let f = kernel.factor(q, eps, t);
        let phase = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
        if kernel == Kernel::RhoDr {
            -f * phase.sin() * (k[0] * e[0] + k[1] * e[1] + k[2] * e[2])
        } else {
            f * phase.cos()
        }
    };
    let cells = Cells {
        d,
        lambda,
        k_max: lat.k_max,
    };
    // symmetric lattice; the integrand is even in k, so sum the half k_0 < 0 twice
    let half = (lat.k_max / lat.h).ceil() as usize;
    let n = 2 * half;
    let h = lat.h;
    let center = |i: usize| (i as f64 + 0.5 - half as f64) * h;
    let slabs: Vec<f64> = (0..half)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if d == 2 {
                    acc += cells.refine(&term, [center(i), center(j), 0.0], h, lat.cut_depth);
                } else {
                    for l in 0..n {
                        acc += cells.refine(
                            &term,
                            [center(i), center(j), center(l)],
                            h,
                            lat.cut_depth,
                        );
                    }
                }
            }
            acc
        })
        .collect();
    2.0 * slabs.iter().sum::<f64>()
}

struct Cells {
    d: usize,
    lambda: f64,
    k_max: f64,
}

impl Cells {
    /// Midpoint value of the cell of side `h` centred at `c`; cells crossed by
    /// the cutoff sphere (or containing the origin) are bisected `depth` more times.
    fn refine(&self, term: &impl Fn(&[f64; 3]) -> f64, c: [f64; 3], h: f64, depth: u32) -> f64 {
        let d = self.d;
        let q = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let half_diag = 0.5 * h * (d as f64).sqrt();
        if q - half_diag > self.k_max {
            return 0.0;
        }
        let cut = (q - self.lambda).abs() <= half_diag || q <= half_diag;
        if !cut || depth == 0 {
            return term(&c) * h.powi(d as i32);
        }
        let mut acc = 0.0;
        for corner in 0..1usize << d {
            let mut child = c;
            for (a, v) in child.iter_mut().enumerate().take(d) {
                *v += if corner >> a & 1 == 1 {
                    0.25 * h
                } else {
                    -0.25 * h
                };
            }
            acc += self.refine(term, child, 0.5 * h, depth - 1);
        }
        acc
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `int_a^inf f` by Simpson on `[a, a + len]`, for integrands negligible beyond.
pub fn simpson_tail(f: impl Fn(f64) -> f64, a: f64, len: f64, n: usize) -> f64 {
    simpson(f, a, a + len, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 6);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn lattice_reproduces_gaussian_diagonal() {
        // W at the origin, d = 3: 2 pi int_lambda^inf k e^{-eps k^2} dk = (pi / eps) e^{-eps lambda^2}
        let (eps, lambda) = (0.5, 1.0);
        let v = lattice_kernel(
            Kernel::W,
            3,
            eps,
            lambda,
            0.0,
            0.0,
            &[1.0, 0.0, 0.0],
            Lattice::for_eps(3, eps),
        );
        let want = PI / eps * (-eps * lambda * lambda).exp();
        assert!((v / want - 1.0).abs() < 1e-3, "{v} {want}");
    }

    #[test]
    fn lattice_two_dim_matches_closed_form() {
        // d = 2, t = 0, r = 0: pi int_lambda^inf e^{-eps k^2} dk
        let (eps, lambda) = (0.25, 1.0);
        let v = lattice_kernel(
            Kernel::W,
            2,
            eps,
            lambda,
            0.0,
            0.0,
            &[1.0, 0.0],
            Lattice::for_eps(2, eps),
        );
        let want = PI * simpson_tail(|k| (-eps * k * k).exp(), lambda, 20.0, 20_000);
        assert!((v / want - 1.0).abs() < 1e-3, "{v} {want}");
    }
}
