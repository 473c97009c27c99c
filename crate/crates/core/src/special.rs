//! Bessel functions, spherical Bessel functions and the sine integral.
//!
//! `J0`/`J1` use the power series for small arguments, Miller's backward
//! recurrence (normalized by `J0 + 2 sum J_2k = 1`) on the middle range and the
//! Hankel asymptotic expansion for large arguments. `Si` uses its power series
//! below 4 and the continued fraction for `E1(ix)` above.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;

const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x).0
}

/// Bessel function of the first kind of order one.
pub fn bessel_j1(x: f64) -> f64 {
    bessel_j01(x).1
}

/// `(J0(x), J1(x))` evaluated together.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (j0, j1) = if ax <= SERIES_LIMIT {
        j01_series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        j01_miller(ax)
    } else {
        j01_hankel(ax)
    };
    if x < 0.0 {
        (j0, -j1)
    } else {
        (j0, j1)
    }
}

fn j01_series(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let mut s0 = t0;
    let mut s1 = t1;
    for k in 1..40 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.abs() < 1e-18 * s0.abs() && t1.abs() < 1e-18 * s1.abs().max(1e-300) {
            break;
        }
    }
    (s0, s1)
}

fn j01_miller(x: f64) -> (f64, f64) {
    let start = 2 * (((x + 24.0 + 3.0 * x.sqrt()) as usize) / 2 + 1);
    let two_over_x = 2.0 / x;
    let mut jp1 = 0.0; // J_{k+1}
    let mut jk = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    let mut k = start;
    while k > 0 {
        let jm1 = (k as f64) * two_over_x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        k -= 1;
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * jk;
        }
        if k == 1 {
            j1 = jk;
        }
        if k == 0 {
            j0 = jk;
        }
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn j01_hankel(x: f64) -> (f64, f64) {
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    let (s, c) = x.sin_cos();
    // cos/sin of x - pi/4 and x - 3pi/4 without subtracting large phases
    let c0 = (c + s) * FRAC_1_SQRT_2;
    let s0 = (s - c) * FRAC_1_SQRT_2;
    let c1 = (s - c) * FRAC_1_SQRT_2;
    let s1 = -(s + c) * FRAC_1_SQRT_2;
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p0 * c0 - q0 * s0), amp * (p1 * c1 - q1 * s1))
}

fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..120 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // a_k / x^k with sign (-1)^{floor(k/2)} folded into P (even k) and Q (odd k)
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

/// Spherical Bessel `j0(x) = sin(x) / x`.
pub fn spherical_j0(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Spherical Bessel `j1(x) = (sin x - x cos x) / x^2`.
pub fn spherical_j1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let q = -0.5 * x * x;
        let mut term = x / 3.0;
        let mut sum = term;
        for k in 1..30 {
            let kf = k as f64;
            term *= q / (kf * (2.0 * kf + 3.0));
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let (s, c) = x.sin_cos();
        (s - x * c) / (x * x)
    }
}

/// Sine integral `Si(x) = int_0^x sin(t)/t dt`.
pub fn sine_integral(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 4.0 {
        let q = -ax * ax;
        let mut fact_term = ax; // x^{2k+1} / (2k+1)!
        let mut sum = ax;
        for k in 1..40 {
            let kf = k as f64;
            fact_term *= q / ((2.0 * kf) * (2.0 * kf + 1.0));
            let term = fact_term / (2.0 * kf + 1.0);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        // Lentz evaluation of the continued fraction for E1(ix)
        let tiny = 1e-300;
        let mut b = Complex64::new(1.0, ax);
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 2..1000 {
            let a = -((i - 1) as f64).powi(2);
            b += 2.0;
            d = Complex64::new(1.0, 0.0) / (d * a + b);
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        let (s, co) = ax.sin_cos();
        let h = Complex64::new(co, -s) * h;
        FRAC_PI_2 + h.im
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// n-th positive zero (n >= 1) of `J0`.
pub fn bessel_j0_zero(n: usize) -> f64 {
    let b = (n as f64 - 0.25) * PI;
    let b8 = 8.0 * b;
    let mut x = b + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3));
    for _ in 0..4 {
        let (j0, j1) = bessel_j01(x);
        let dx = j0 / j1;
        x += dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// n-th positive zero (n >= 1) of `J1`, excluding the origin.
pub fn bessel_j1_zero(n: usize) -> f64 {
    let b = (n as f64 + 0.25) * PI;
    let b8 = 8.0 * b;
    let mut x = b - 3.0 / b8 + 36.0 / b8.powi(3);
    for _ in 0..4 {
        let (j0, j1) = bessel_j01(x);
        let dx = -j1 / (j0 - j1 / x);
        x += dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// n-th positive zero (n >= 1) of the spherical `j1`, i.e. of `tan x = x`.
pub fn spherical_j1_zero(n: usize) -> f64 {
    let q = (n as f64 + 0.5) * PI;
    let mut x = q - 1.0 / q;
    for _ in 0..6 {
        let (s, c) = x.sin_cos();
        let dx = -(s - x * c) / (x * s);
        x += dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Series with Neumaier summation; independent of the production branches.
    fn j_series_oracle(nu: u32, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(nu as i32);
        for k in 1..=nu {
            term /= k as f64;
        }
        let q = -0.25 * x * x;
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 0..200u32 {
            if k > 0 {
                term *= q / ((k as f64) * ((k + nu) as f64));
            }
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            if term.abs() < 1e-30 && k > 10 {
                break;
            }
        }
        sum + comp
    }

    #[test]
    fn j0_j1_reference_values() {
        let cases = [
            (1.0, 0.765_197_686_557_966_6, 0.440_050_585_744_933_5),
            (5.0, -0.177_596_771_314_338_3, -0.327_579_137_591_465_2),
            (10.0, -0.245_935_764_451_348_3, 0.043_472_746_168_861_44),
            (30.0, -0.086_367_983_581_040_31, -0.118_751_062_616_623_05),
            (100.0, 0.019_985_850_304_223_33, -0.077_145_352_014_112_3),
        ];
        for (x, j0, j1) in cases {
            let (a, b) = bessel_j01(x);
            assert!((a - j0).abs() < 1e-13, "J0({x}) = {a}, want {j0}");
            assert!((b - j1).abs() < 1e-13, "J1({x}) = {b}, want {j1}");
        }
    }

    #[test]
    fn j0_j1_match_series_oracle_across_branches() {
        let mut x = 0.01;
        while x < 12.0 {
            let (a, b) = bessel_j01(x);
            assert!((a - j_series_oracle(0, x)).abs() < 1e-11, "J0 at {x}");
            assert!((b - j_series_oracle(1, x)).abs() < 1e-11, "J1 at {x}");
            x += 0.137;
        }
    }

    #[test]
    fn branch_seam_is_continuous() {
        for &x in &[SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            let lo = bessel_j01(x * (1.0 - 1e-15));
            let hi = bessel_j01(x * (1.0 + 1e-15));
            assert!((lo.0 - hi.0).abs() < 1e-12, "J0 seam at {x}: {lo:?} {hi:?}");
            assert!((lo.1 - hi.1).abs() < 1e-12, "J1 seam at {x}: {lo:?} {hi:?}");
        }
    }

    #[test]
    fn bessel_wronskian_like_identity_holds_for_large_arguments() {
        // J0'' + J0'/x + J0 = 0 with J0' = -J1, J1' = J0 - J1/x
        for &x in &[26.0, 40.0, 77.7, 300.0] {
            let h = 1e-4;
            let d2 = (bessel_j0(x + h) - 2.0 * bessel_j0(x) + bessel_j0(x - h)) / (h * h);
            let res = d2 - bessel_j1(x) / x + bessel_j0(x);
            assert!(res.abs() < 1e-6, "residual {res} at {x}");
        }
    }

    #[test]
    fn sine_integral_reference_values() {
        let cases = [
            (0.5, 0.493_107_418_043_066_7),
            (1.0, 0.946_083_070_367_183),
            (PI, 1.851_937_051_982_466),
            (5.0, 1.549_931_244_944_674),
            (10.0, 1.658_347_594_218_874),
            (20.0, 1.548_241_701_043_44),
        ];
        for (x, want) in cases {
            assert!((sine_integral(x) - want).abs() < 1e-12, "Si({x})");
            assert!((sine_integral(-x) + want).abs() < 1e-12);
        }
        assert!((sine_integral(1e6) - FRAC_PI_2).abs() < 2e-6);
    }

    #[test]
    fn sine_integral_continuous_at_branch() {
        let a = sine_integral(4.0 - 1e-12);
        let b = sine_integral(4.0 + 1e-12);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spherical_bessel_small_and_large() {
        for &x in &[1e-6, 1e-3, 0.3, 0.999, 1.001, 3.0, 50.0] {
            let (s, c) = f64::sin_cos(x);
            let j0 = s / x;
            assert!((spherical_j0(x) - j0).abs() < 1e-13);
            if x > 0.2 {
                let j1 = (s - x * c) / (x * x);
                assert!((spherical_j1(x) - j1).abs() < 1e-12, "j1 at {x}");
            }
        }
        assert!((spherical_j1(1e-3) - (1e-3 / 3.0 - 1e-9 / 30.0)).abs() < 1e-17);
    }

    #[test]
    fn zeros_are_zeros() {
        assert!((bessel_j0_zero(1) - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((bessel_j1_zero(1) - 3.831_705_970_207_512).abs() < 1e-12);
        assert!((spherical_j1_zero(1) - 4.493_409_457_909_064).abs() < 1e-12);
        for n in 1..200 {
            assert!(bessel_j0(bessel_j0_zero(n)).abs() < 1e-13);
            assert!(bessel_j1(bessel_j1_zero(n)).abs() < 1e-13);
            assert!(spherical_j1(spherical_j1_zero(n)).abs() < 1e-14);
            assert!(bessel_j0_zero(n + 1) > bessel_j0_zero(n));
        }
    }
}
