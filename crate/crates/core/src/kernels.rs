//! Pair kernels of the Nelson and polaron path integrals.
//!
//! Every kernel is a Fourier integral over `|k| >= lambda` of a radial
//! function. With `r = |x|` the angular integration gives
//!
//! * d = 3: `int d^3k f(|k|) e^{-ik.x} = 4 pi int k^2 f(k) j0(kr) dk`
//! * d = 2: `int d^2k f(|k|) e^{-ik.x} = 2 pi int k f(k) J0(kr) dk`
//!
//! and the radial derivative swaps `j0 -> -k j1` (`J0 -> -k J1`). The Nelson
//! kernels use `f(k) = e^{-eps k^2 - k|t|} / (2k)`, times the propagator
//! `beta(k) = 1 / (k + k^2/2)` for `rho`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Model, ModelParams};
use crate::quad::{self, Envelope, QuadratureConfig};
use crate::special;

/// Which kernel a table or evaluator refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    /// Nelson pair potential `W_eps(x, t)`.
    W,
    /// `rho_eps(x, t)`, the Nelson kernel with the extra propagator factor.
    Rho,
    /// Radial derivative `d/dr rho_eps(r, t)`.
    RhoDr,
    /// Polaron pair potential `W^pol_eps(x, t)`.
    PolaronW,
}

impl KernelId {
    /// Kernels whose value is even and smooth in `r` at `r = 0` (for `t != 0`).
    pub fn is_even_in_r(self) -> bool {
        !matches!(self, KernelId::RhoDr)
    }
}

/// `beta(k) = 1 / (omega(k) + k^2 / 2)` with `omega(k) = k`.
pub fn propagator_beta(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("propagator needs k > 0, got {k}")));
    }
    Ok(beta(k))
}

#[inline]
fn beta(k: f64) -> f64 {
    1.0 / (k * (1.0 + 0.5 * k))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Nelson {
    W,
    Rho,
}

impl Nelson {
    /// Majorant `coef * k^power` of the radial factor `f(k) / e^{...}`.
    fn bound(self) -> (f64, f64) {
        match self {
            Nelson::W => (0.5, -1.0),
            Nelson::Rho => (1.0, -3.0),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Nelson::W => "W",
            Nelson::Rho => "rho",
        }
    }
}

/// Nelson pair potential `W_eps(x, t)` at `|x| = r`.
pub fn pair_potential_w(
    r: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    params.require_model(Model::Nelson)?;
    nelson_value(Nelson::W, r, t, params, quad)
}

/// `rho_eps(x, t)` at `|x| = r`.
pub fn rho_kernel(r: f64, t: f64, params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.require_model(Model::Nelson)?;
    nelson_value(Nelson::Rho, r, t, params, quad)
}

/// `d/dr rho_eps(r, t)`; the gradient is `(x / r)` times this value.
pub fn rho_radial_derivative(
    r: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    params.require_model(Model::Nelson)?;
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "radial derivative needs r > 0, got {r} (the gradient vanishes at the origin)"
        )));
    }
    check_args(r, t, params)?;
    let tau = t.abs();
    let eps = params.eps;
    let lambda = params.lambda;
    let what = format!("d rho/dr at r={r}, t={t}");
    let (c_f, p_f) = Nelson::Rho.bound();
    let damp = move |k: f64| (-eps * k * k - tau * k).exp();
    match params.d {
        3 => {
            let f =
                |k: f64| -4.0 * PI * k * k * 0.5 * damp(k) * beta(k) * special::spherical_j1(k * r);
            let env = Envelope {
                coef: 4.0 * PI * c_f * 1.2 / r,
                power: p_f + 2.0,
                eps,
                tau,
            };
            let zero = |n: usize| special::spherical_j1_zero(n) / r;
            Ok(quad::oscillatory(&f, lambda, zero, env, quad, &what)?.value)
        }
        _ => {
            let f = |k: f64| -2.0 * PI * k * 0.5 * damp(k) * beta(k) * special::bessel_j1(k * r);
            let env = Envelope {
                coef: 2.0 * PI * c_f / r.sqrt(),
                power: p_f + 1.5,
                eps,
                tau,
            };
            let zero = |n: usize| special::bessel_j1_zero(n) / r;
            Ok(quad::oscillatory(&f, lambda, zero, env, quad, &what)?.value)
        }
    }
}

/// Diagonal value `rho_eps(0, 0)`; the energy counterterm is `-g^2` times it.
pub fn rho_diag(params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.require_model(Model::Nelson)?;
    if params.d == 3 && params.eps == 0.0 {
        return Err(Error::Divergence(
            "rho_0(0, 0) diverges logarithmically in three dimensions".into(),
        ));
    }
    nelson_value(Nelson::Rho, 0.0, 0.0, params, quad)
}

/// Energy counterterm `E_eps = -g^2 rho_eps(0, 0)`.
pub fn counterterm(params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    Ok(-params.g * params.g * rho_diag(params, quad)?)
}

/// `int_{|k| >= lambda} e^{-eps k^2} / omega(k)^3 dk`, the exponent in the
/// lower bound `gamma(T) >= exp(-g^2 * this)`.
pub fn overlap_bound_integral(params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.require_model(Model::Nelson)?;
    params.validate()?;
    let eps = params.eps;
    let lambda = params.lambda;
    match params.d {
        3 => {
            if eps == 0.0 {
                return Err(Error::Divergence(
                    "int_{|k|>=lambda} |k|^-3 d^3k diverges without an ultraviolet cutoff".into(),
                ));
            }
            let f = |k: f64| 4.0 * PI * (-eps * k * k).exp() / k;
            let env = Envelope {
                coef: 4.0 * PI,
                power: -1.0,
                eps,
                tau: 0.0,
            };
            Ok(quad::monotone_tail(&f, lambda, env, quad, "overlap bound")?.value)
        }
        _ => {
            if eps == 0.0 {
                return Ok(2.0 * PI / lambda);
            }
            let f = |k: f64| 2.0 * PI * (-eps * k * k).exp() / (k * k);
            let env = Envelope {
                coef: 2.0 * PI,
                power: -2.0,
                eps,
                tau: 0.0,
            };
            Ok(quad::monotone_tail(&f, lambda, env, quad, "overlap bound")?.value)
        }
    }
}

/// Lower bound `exp(-g^2 int e^{-eps k^2} omega^-3 dk)` on the ground-state overlap.
pub fn overlap_lower_bound(params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    Ok((-params.g * params.g * overlap_bound_integral(params, quad)?).exp())
}

fn check_args(r: f64, t: f64, params: &ModelParams) -> Result<()> {
    params.validate()?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!(
            "radius must be finite and >= 0, got {r}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::domain("time gap must be finite"));
    }
    Ok(())
}

fn nelson_value(
    kind: Nelson,
    r: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_args(r, t, params)?;
    let tau = t.abs();
    let eps = params.eps;
    let lambda = params.lambda;
    let d = params.d;
    if eps == 0.0 && tau == 0.0 && r == 0.0 {
        let finite = kind == Nelson::Rho && d == 2;
        if !finite {
            return Err(Error::Divergence(format!(
                "{}_0(0, 0) is infinite in d = {d}",
                kind.name()
            )));
        }
    }
    let (c_f, p_f) = kind.bound();
    let radial = move |k: f64| {
        let base = 0.5 * (-eps * k * k - tau * k).exp() / k;
        match kind {
            Nelson::W => base,
            Nelson::Rho => base * beta(k),
        }
    };
    let what = format!("{} at r={r}, t={t}", kind.name());
    if r == 0.0 {
        let (f, env): (Box<dyn Fn(f64) -> f64>, Envelope) = if d == 3 {
            (
                Box::new(move |k: f64| 4.0 * PI * k * k * radial(k)),
                Envelope {
                    coef: 4.0 * PI * c_f,
                    power: p_f + 2.0,
                    eps,
                    tau,
                },
            )
        } else {
            (
                Box::new(move |k: f64| 2.0 * PI * k * radial(k)),
                Envelope {
                    coef: 2.0 * PI * c_f,
                    power: p_f + 1.0,
                    eps,
                    tau,
                },
            )
        };
        return Ok(quad::monotone_tail(&f, lambda, env, quad, &what)?.value);
    }
    if d == 3 {
        let f = |k: f64| 4.0 * PI * k * k * radial(k) * special::spherical_j0(k * r);
        let env = Envelope {
            coef: 4.0 * PI * c_f / r,
            power: p_f + 1.0,
            eps,
            tau,
        };
        let zero = |n: usize| n as f64 * PI / r;
        Ok(quad::oscillatory(&f, lambda, zero, env, quad, &what)?.value)
    } else {
        let f = |k: f64| 2.0 * PI * k * radial(k) * special::bessel_j0(k * r);
        let env = Envelope {
            coef: 2.0 * PI * c_f / r.sqrt(),
            power: p_f + 0.5,
            eps,
            tau,
        };
        let zero = |n: usize| special::bessel_j0_zero(n) / r;
        Ok(quad::oscillatory(&f, lambda, zero, env, quad, &what)?.value)
    }
}

/// Polaron pair potential `W^pol_eps(x, t)` at `|x| = r` (three dimensions).
///
/// The radial form is `(2 pi / r) e^{-|t|} int_{lambda r}^inf e^{-eps u^2 / r^2} sin(u)/u du`.
/// It is evaluated through `int_{a}^inf = int_0^inf - int_0^a`, where the
/// full-line integral is `(pi/2) erf(r / (2 sqrt(eps)))` for `eps > 0` and
/// `pi/2` for `eps = 0`; the remaining finite piece is `Si(lambda r)` when
/// `eps = 0` and a Gauss-Kronrod integral otherwise.
pub fn polaron_w(r: f64, t: f64, params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.require_model(Model::Polaron)?;
    check_args(r, t, params)?;
    let eps = params.eps;
    let lambda = params.lambda;
    let time = (-t.abs()).exp();
    if eps == 0.0 {
        if r == 0.0 {
            return Err(Error::Divergence(
                "W^pol_0(0, t) is infinite (1/r singularity)".into(),
            ));
        }
        let inner = if lambda == 0.0 {
            0.5 * PI
        } else {
            0.5 * PI - special::sine_integral(lambda * r)
        };
        return Ok(2.0 * PI / r * inner * time);
    }
    // 2 pi [ (pi/2) erf(r / 2 sqrt eps) / r - int_0^lambda e^{-eps k^2} sinc(kr) dk ]
    let s = 2.0 * eps.sqrt();
    let full = if r == 0.0 {
        0.5 * PI * 2.0 / (PI.sqrt() * s)
    } else {
        0.5 * PI * libm::erf(r / s) / r
    };
    let cut = if lambda == 0.0 {
        0.0
    } else {
        let f = |k: f64| (-eps * k * k).exp() * special::spherical_j0(k * r);
        let res = quad::adaptive(
            &f,
            0.0,
            lambda,
            0.1 * quad.abs_tol,
            quad.rel_tol,
            quad.panel_rule.max_subdivisions,
        );
        if res.error > quad.abs_tol.max(quad.rel_tol * res.value.abs()) * 10.0 {
            return Err(Error::Quadrature {
                what: format!("polaron W at r={r}"),
                estimate: res.value,
                error: res.error,
            });
        }
        res.value
    };
    Ok(2.0 * PI * (full - cut) * time)
}

/// Evaluate any kernel by id.
pub fn evaluate(
    id: KernelId,
    r: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    match id {
        KernelId::W => pair_potential_w(r, t, params, quad),
        KernelId::Rho => rho_kernel(r, t, params, quad),
        KernelId::RhoDr => {
            if r == 0.0 {
                t.is_finite()
                    .then_some(0.0)
                    .ok_or_else(|| Error::domain("time gap must be finite"))
            } else {
                rho_radial_derivative(r, t, params, quad)
            }
        }
        KernelId::PolaronW => polaron_w(r, t, params, quad),
    }
}
