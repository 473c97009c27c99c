//! Matrix elements between coherent (exponential) vectors.
//!
//! For radial momentum profiles `rho_1, rho_2` and amplitudes `alpha, beta`
//!
//! ```text
//! xi = conj(alpha)^2 |rho_1/sqrt(w)|^2 + beta^2 |rho_2/sqrt(w)|^2
//!    + 2 conj(alpha) beta (rho_1/sqrt(w), e^{-2Tw} rho_2/sqrt(w))
//!    + 2 conj(alpha) g int_{-T}^{T} G_1(|B_s|, |s - T|) ds
//!    + 2 beta g int_{-T}^{T} G_2(|B_s|, |s + T|) ds
//! ```
//!
//! with `G_i(r, u) = int_{|k| >= lambda} rho_i(|k|) |k|^{-1/2} e^{-u|k|} e^{-ik.x} dk`.
//! The profile norms run over all of momentum space; only the field
//! coupling carries the infrared cutoff.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vacuum::{log_weight, prepare_kernels, VacuumMode};
use super::{trapezoid_weight, KernelSettings, McConfig};
use crate::error::{Error, Result};
use crate::estimate::{fingerprint, MCEstimate};
use crate::params::{Model, ModelParams};
use crate::paths::{sample_path, BrownianPath, PathSeed, TimeGrid};
use crate::quad::{self, Envelope, QuadratureConfig};
use crate::special;

/// Radial momentum profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Profile {
    /// `amplitude * exp(-k^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
}

impl Profile {
    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        match *self {
            Profile::Gaussian { amplitude, width } => {
                amplitude * (-0.5 * k * k / (width * width)).exp()
            }
        }
    }

    /// `(coef, eps)` with `|rho(k)| <= coef e^{-eps k^2}`.
    fn bound(&self) -> (f64, f64) {
        match *self {
            Profile::Gaussian { amplitude, width } => (amplitude.abs(), 0.5 / (width * width)),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Profile::Gaussian { amplitude, width } => {
                if !(amplitude.is_finite() && width.is_finite() && width > 0.0) {
                    return Err(Error::ProfileIntegrability(format!(
                        "gaussian profile needs finite amplitude and width > 0, got {amplitude}, {width}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `(rho_a / sqrt(w), e^{-u w} rho_b / sqrt(w)) = 4 pi int_0^inf k rho_a rho_b e^{-u k} dk`.
fn weighted_inner(a: &Profile, b: &Profile, u: f64, quad: &QuadratureConfig) -> Result<f64> {
    a.check()?;
    b.check()?;
    let (ca, ea) = a.bound();
    let (cb, eb) = b.bound();
    let f = |k: f64| 4.0 * PI * k * a.eval(k) * b.eval(k) * (-u * k).exp();
    let env = Envelope {
        coef: 4.0 * PI * ca * cb,
        power: 1.0,
        eps: ea + eb,
        tau: u,
    };
    let r =
        quad::monotone_tail(&f, 0.0, env, quad, "profile inner product").map_err(|e| match e {
            Error::Quadrature {
                what,
                estimate,
                error,
            } => Error::ProfileIntegrability(format!("{what}: estimate {estimate}, error {error}")),
            other => other,
        })?;
    if !r.value.is_finite() {
        return Err(Error::ProfileIntegrability(
            "profile norm is not finite".into(),
        ));
    }
    Ok(r.value)
}

/// `G(r, u) = 4 pi int_lambda^inf k^{3/2} rho(k) e^{-uk} j0(kr) dk`.
pub fn profile_field(
    profile: &Profile,
    r: f64,
    u: f64,
    lambda: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    profile.check()?;
    let (c, eps) = profile.bound();
    let what = format!("profile field at r={r}, u={u}");
    if r == 0.0 {
        let f = |k: f64| 4.0 * PI * k * k.sqrt() * profile.eval(k) * (-u * k).exp();
        let env = Envelope {
            coef: 4.0 * PI * c,
            power: 1.5,
            eps,
            tau: u,
        };
        return Ok(quad::monotone_tail(&f, lambda, env, quad, &what)?.value);
    }
    let f = |k: f64| {
        4.0 * PI * k * k.sqrt() * profile.eval(k) * (-u * k).exp() * special::spherical_j0(k * r)
    };
    let env = Envelope {
        coef: 4.0 * PI * c / r,
        power: 0.5,
        eps,
        tau: u,
    };
    Ok(quad::oscillatory(&f, lambda, |n| n as f64 * PI / r, env, quad, &what)?.value)
}

/// Coherent-vector exponent `xi` for one path.
#[allow(clippy::too_many_arguments)]
pub fn coherent_xi(
    path: &BrownianPath,
    alpha: Complex64,
    beta: Complex64,
    rho1: &Profile,
    rho2: &Profile,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    params.require_model(Model::Nelson)?;
    if params.d != 3 {
        return Err(Error::invalid(
            "coherent matrix elements are implemented for d = 3",
        ));
    }
    if !path.grid.two_sided || path.d != 3 {
        return Err(Error::invalid(
            "coherent xi needs a two-sided three-dimensional path",
        ));
    }
    let t = path.grid.t;
    let ac = alpha.conj();
    let n1 = weighted_inner(rho1, rho1, 0.0, quad)?;
    let n2 = weighted_inner(rho2, rho2, 0.0, quad)?;
    let x = weighted_inner(rho1, rho2, 2.0 * t, quad)?;
    let mut xi = ac * ac * n1 + beta * beta * n2 + 2.0 * ac * beta * x;
    if params.g != 0.0 && (alpha != Complex64::new(0.0, 0.0) || beta != Complex64::new(0.0, 0.0)) {
        let n = path.n_nodes();
        let dt = path.grid.dt();
        let (mut i1, mut i2) = (0.0, 0.0);
        for i in 0..n {
            let s = path.grid.time(i);
            let r = path.norm(i);
            let w = trapezoid_weight(i, n);
            if alpha != Complex64::new(0.0, 0.0) {
                i1 += w * profile_field(rho1, r, (s - t).abs(), params.lambda, quad)?;
            }
            if beta != Complex64::new(0.0, 0.0) {
                i2 += w * profile_field(rho2, r, (s + t).abs(), params.lambda, quad)?;
            }
        }
        xi += 2.0 * ac * params.g * dt * i1 + 2.0 * beta * params.g * dt * i2;
    }
    Ok(xi)
}

/// Estimate of `E[e^{i P . dB} e^{(g^2/2) S_0^ren + xi/4}]` (window `tau = 2T`).
#[allow(clippy::too_many_arguments)]
pub fn coherent_expectation(
    params: &ModelParams,
    alpha: Complex64,
    beta: Complex64,
    rho1: &Profile,
    rho2: &Profile,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> Result<MCEstimate> {
    mc.validate()?;
    let mode = VacuumMode::renormalized();
    let kernels = prepare_kernels(params, mode, grid, settings)?;
    let zero = Complex64::new(0.0, 0.0);
    let samples: Vec<Complex64> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|idx| {
            let path = sample_path(grid, params.d, PathSeed::new(mc.master_seed, idx))?;
            let lw = match &kernels {
                Some(k) => log_weight(&path, k, mode)?,
                None => 0.0,
            };
            if !(lw <= mc.log_weight_cap) {
                return Err(Error::WeightCap {
                    cap: mc.log_weight_cap,
                    hits: 1,
                    max_log_weight: lw,
                });
            }
            let inc = path.endpoint_increment();
            let theta: f64 = params.p.iter().zip(&inc).map(|(a, b)| a * b).sum();
            let w = lw.exp();
            let base = if theta == 0.0 {
                Complex64::new(w, 0.0)
            } else {
                Complex64::new(w * theta.cos(), w * theta.sin())
            };
            if alpha == zero && beta == zero {
                return Ok(base);
            }
            let xi = coherent_xi(&path, alpha, beta, rho1, rho2, params, &settings.quad)?;
            Ok(base * (xi / 4.0).exp())
        })
        .collect::<Result<_>>()?;
    MCEstimate::from_samples(
        &samples,
        mc.master_seed,
        fingerprint(&(
            "nelson_coherent",
            params,
            alpha,
            beta,
            rho1,
            rho2,
            grid,
            mc,
            settings,
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(a: f64, w: f64) -> Profile {
        Profile::Gaussian {
            amplitude: a,
            width: w,
        }
    }

    #[test]
    fn zero_amplitudes_give_zero_xi() {
        let g = TimeGrid::two_sided(1.0, 4).unwrap();
        let p = ModelParams::nelson(3, 0.5, 1.0, 0.5, 1.0);
        let path = sample_path(&g, 3, PathSeed::new(1, 1)).unwrap();
        let z = Complex64::new(0.0, 0.0);
        let xi = coherent_xi(
            &path,
            z,
            z,
            &gauss(1.0, 1.0),
            &gauss(1.0, 2.0),
            &p,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(xi, z);
    }

    #[test]
    fn free_xi_matches_gaussian_norms() {
        // 4 pi int k a^2 e^{-k^2/w^2} dk = 2 pi a^2 w^2
        let g = TimeGrid::two_sided(1.0, 4).unwrap();
        let p = ModelParams::nelson(3, 0.0, 1.0, 0.5, 1.0);
        let path = sample_path(&g, 3, PathSeed::new(1, 1)).unwrap();
        let (r1, r2) = (gauss(1.5, 1.0), gauss(0.5, 2.0));
        let alpha = Complex64::new(0.3, 0.4);
        let beta = Complex64::new(-0.2, 0.1);
        let q = QuadratureConfig::default();
        let xi = coherent_xi(&path, alpha, beta, &r1, &r2, &p, &q).unwrap();
        let n1 = 2.0 * PI * 1.5 * 1.5;
        let n2 = 2.0 * PI * 0.25 * 4.0;
        let cross = weighted_inner(&r1, &r2, 2.0, &q).unwrap();
        let want =
            alpha.conj() * alpha.conj() * n1 + beta * beta * n2 + 2.0 * alpha.conj() * beta * cross;
        assert!((xi - want).norm() < 1e-9 * want.norm());
        let n1q = weighted_inner(&r1, &r1, 0.0, &q).unwrap();
        assert!((n1q - n1).abs() < 1e-10 * n1);
    }

    #[test]
    fn cross_term_decays_with_horizon() {
        let q = QuadratureConfig::default();
        let (r1, r2) = (gauss(1.0, 1.0), gauss(1.0, 1.0));
        let mut prev = f64::INFINITY;
        let first = weighted_inner(&r1, &r2, 1.0, &q).unwrap();
        for t in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let x = weighted_inner(&r1, &r2, 2.0 * t, &q).unwrap();
            assert!(x < prev && x > 0.0);
            prev = x;
        }
        assert!(prev < 0.05 * first);
    }

    #[test]
    fn profile_field_matches_origin_limit() {
        let q = QuadratureConfig::default();
        let prof = gauss(1.0, 1.5);
        let at0 = profile_field(&prof, 0.0, 0.3, 1.0, &q).unwrap();
        let near = profile_field(&prof, 1e-4, 0.3, 1.0, &q).unwrap();
        assert!((at0 - near).abs() < 1e-6 * at0.abs());
    }

    #[test]
    fn bad_profile_is_rejected() {
        let q = QuadratureConfig::default();
        let e = weighted_inner(&gauss(1.0, -1.0), &gauss(1.0, 1.0), 0.0, &q).unwrap_err();
        assert!(matches!(e, Error::ProfileIntegrability(_)));
    }
}
