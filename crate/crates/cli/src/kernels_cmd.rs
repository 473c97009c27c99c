//! Kernel values, tables and closed-form cross-checks.

use std::f64::consts::PI;

use pimc_core::estimators::KernelSettings;
use pimc_core::kernels::{self, KernelId};
use pimc_core::paths::TimeGrid;
use pimc_core::quad::QuadratureConfig;
use pimc_core::table::KernelTable;
use pimc_core::{Model, ModelParams};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KernelChoice {
    /// Nelson pair potential W
    W,
    /// rho, the pair potential with the propagator factor
    Rho,
    /// radial derivative of rho
    RhoDr,
    /// polaron pair potential (three dimensions)
    Polaron,
}

impl KernelChoice {
    pub fn id(self) -> KernelId {
        match self {
            KernelChoice::W => KernelId::W,
            KernelChoice::Rho => KernelId::Rho,
            KernelChoice::RhoDr => KernelId::RhoDr,
            KernelChoice::Polaron => KernelId::PolaronW,
        }
    }

    /// Parameters of the right model for this kernel.
    pub fn params(self, d: usize, g: f64, lambda: f64, eps: f64, t: f64) -> ModelParams {
        match self {
            KernelChoice::Polaron => ModelParams::polaron(g, lambda, eps, t),
            _ => ModelParams::nelson(d, g, lambda, eps, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub r: f64,
    pub t: f64,
    pub value: f64,
}

pub fn evaluate(
    kernel: KernelChoice,
    params: &ModelParams,
    quad: &QuadratureConfig,
    points: &[(f64, f64)],
) -> Result<Vec<KernelValue>, CliError> {
    params.validate()?;
    points
        .iter()
        .map(|&(r, t)| {
            let value = kernels::evaluate(kernel.id(), r, t, params, quad)?;
            Ok(KernelValue { r, t, value })
        })
        .collect()
}

/// A validated table covering every node pair of a grid with step `dt` on `[-T, T]`
/// (Nelson) or `[0, T]` (polaron).
pub fn build_table(
    kernel: KernelChoice,
    params: &ModelParams,
    dt: f64,
    settings: &KernelSettings,
) -> Result<KernelTable, CliError> {
    let grid = TimeGrid::with_step(params.t, dt, params.model == Model::Nelson)?;
    let spec = settings.table_spec(&grid, params.d);
    Ok(KernelTable::build(
        params,
        kernel.id(),
        &spec,
        &settings.quad,
    )?)
}

/// Quadrature result against a closed form.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub rel_error: f64,
    pub pass: bool,
}

pub const CHECK_TOLERANCE: f64 = 1e-8;

/// `Si(1)`.
const SI_ONE: f64 = 0.946_083_070_367_183;

fn check(name: String, computed: f64, expected: f64) -> Check {
    let rel_error = ((computed - expected) / expected).abs();
    Check {
        name,
        computed,
        expected,
        rel_error,
        pass: rel_error <= CHECK_TOLERANCE,
    }
}

/// Closed-form cases of every kernel family, at the configured `eps` and
/// `lambda` where they apply (unit values otherwise).
pub fn closed_form_checks(
    eps: f64,
    lambda: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<Check>, CliError> {
    let eps = if eps > 0.0 { eps } else { 1.0 };
    let lambda = if lambda > 0.0 { lambda } else { 1.0 };
    let mut out = Vec::new();

    let p = ModelParams::nelson(3, 1.0, lambda, eps, 1.0);
    out.push(check(
        format!("W d=3 eps={eps} lambda={lambda} at (0,0) = (pi/eps) e^(-eps lambda^2)"),
        kernels::pair_potential_w(0.0, 0.0, &p, quad)?,
        PI / eps * (-eps * lambda * lambda).exp(),
    ));
    let p0 = p.with_eps(0.0);
    out.push(check(
        format!("W d=3 eps=0 lambda={lambda} at (0,1) = 2 pi e^(-lambda) (lambda + 1)"),
        kernels::pair_potential_w(0.0, 1.0, &p0, quad)?,
        2.0 * PI * (-lambda).exp() * (lambda + 1.0),
    ));
    let p2 = ModelParams::nelson(2, 1.0, lambda, 0.0, 1.0);
    out.push(check(
        format!("rho d=2 eps=0 lambda={lambda} at (0,0) = pi ln((2 + lambda)/lambda)"),
        kernels::rho_kernel(0.0, 0.0, &p2, quad)?,
        PI * ((2.0 + lambda) / lambda).ln(),
    ));
    let pol = ModelParams::polaron(1.0, 1.0, 0.0, 1.0);
    out.push(check(
        "polaron eps=0 lambda=1 at (1,0) = 2 pi (pi/2 - Si(1))".into(),
        kernels::polaron_w(1.0, 0.0, &pol, quad)?,
        2.0 * PI * (0.5 * PI - SI_ONE),
    ));
    let ir = pol.with_lambda(0.0);
    for (r, t) in [(0.5, 0.0), (2.0, 0.0), (1.0, 0.7)] {
        out.push(check(
            format!("polaron eps=0 lambda=0 at ({r},{t}) = pi^2 e^(-t)/r"),
            kernels::polaron_w(r, t, &ir, quad)?,
            PI * PI * (-t).exp() / r,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_pass_at_default_settings() {
        let checks = closed_form_checks(0.5, 1.0, &QuadratureConfig::default()).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(checks.len(), 7);
    }
}
