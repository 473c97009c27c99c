//! Path functionals and Monte Carlo estimators for the Nelson model.

pub mod actions;
pub mod coherent;
pub mod vacuum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelId};
use crate::params::{Model, ModelParams};
use crate::paths::TimeGrid;
use crate::quad::QuadratureConfig;
use crate::table::{KernelTable, RadialSlice, TableSpec};

pub use actions::{action_direct, action_renormalized, RenormalizedAction};
pub use coherent::{coherent_expectation, coherent_xi, Profile};
pub use vacuum::{
    diamagnetic_check, energy, energy_from_vacuum, energy_over_horizon, gamma_overlap,
    vacuum_expectation, DiamagneticEntry, DiamagneticReport, EnergyEstimate, GammaEstimate,
    VacuumMode, VacuumRun,
};

/// Monte Carlo run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    pub master_seed: u64,
    /// Largest accepted per-path log-weight.
    pub log_weight_cap: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 10_000,
            master_seed: 1,
            log_weight_cap: 700.0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid("n_paths must be at least 2"));
        }
        if !(self.log_weight_cap > 0.0 && self.log_weight_cap <= 709.0) {
            return Err(Error::invalid("log_weight_cap must be in (0, 709]"));
        }
        Ok(())
    }
}

/// How kernels are evaluated inside the path sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSettings {
    pub quad: QuadratureConfig,
    /// Interpolate from a validated [`KernelTable`]; otherwise every kernel
    /// value is a direct quadrature (slow, for verification).
    pub use_tables: bool,
    pub n_r: usize,
    pub n_tau: usize,
    /// Radius hull in standard deviations of the increment over the whole span.
    pub excursions: f64,
    pub max_table_error: f64,
    pub validation_probes: usize,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            quad: QuadratureConfig::default(),
            use_tables: true,
            n_r: 384,
            n_tau: 256,
            excursions: 8.0,
            max_table_error: 1e-3,
            validation_probes: 1000,
        }
    }
}

impl KernelSettings {
    pub fn direct() -> Self {
        KernelSettings {
            use_tables: false,
            ..KernelSettings::default()
        }
    }

    /// Table grid covering every pair of nodes of `grid` in `d` dimensions.
    pub fn table_spec(&self, grid: &TimeGrid, d: usize) -> TableSpec {
        TableSpec {
            n_r: self.n_r,
            n_tau: self.n_tau,
            max_rel_error: self.max_table_error,
            validation_probes: self.validation_probes,
            ..TableSpec::covering(grid.span(), grid.dt(), d, self.excursions)
        }
    }
}

/// A kernel at every time gap `m dt`, `m = 0..n_nodes`, of a grid.
#[derive(Debug, Clone)]
pub struct GapKernel {
    slices: Vec<RadialSlice>,
    /// Measured interpolation error of the underlying table, if any.
    pub table_error: Option<f64>,
}

impl GapKernel {
    pub fn build(
        id: KernelId,
        params: &ModelParams,
        grid: &TimeGrid,
        settings: &KernelSettings,
    ) -> Result<Self> {
        let dt = grid.dt();
        let n = grid.n_nodes();
        if settings.use_tables {
            let table = KernelTable::build(
                params,
                id,
                &settings.table_spec(grid, params.d),
                &settings.quad,
            )?;
            Ok(GapKernel {
                slices: (0..n).map(|m| table.slice(m as f64 * dt)).collect(),
                table_error: Some(table.interp_error_bound),
            })
        } else {
            Ok(GapKernel {
                slices: (0..n)
                    .map(|m| RadialSlice::direct(id, params, &settings.quad, m as f64 * dt))
                    .collect(),
                table_error: None,
            })
        }
    }

    /// Kernel at time gap `m dt`.
    #[inline]
    pub fn at(&self, m: usize) -> &RadialSlice {
        &self.slices[m]
    }
}

/// Everything the Nelson path functionals need for one parameter set and grid.
#[derive(Debug, Clone)]
pub struct NelsonKernels {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub w: Option<GapKernel>,
    pub rho: Option<GapKernel>,
    pub rho_dr: Option<GapKernel>,
    /// `rho_eps(0, 0)` when finite.
    pub rho_diag: Option<f64>,
}

impl NelsonKernels {
    /// Prepare `W` (for the direct action) and/or `rho`, `d rho/dr` (for the
    /// renormalized action).
    pub fn build(
        params: &ModelParams,
        grid: &TimeGrid,
        direct: bool,
        renormalized: bool,
        settings: &KernelSettings,
    ) -> Result<Self> {
        params.require_model(Model::Nelson)?;
        params.validate()?;
        if !grid.two_sided {
            return Err(Error::invalid(
                "the Nelson functionals use a two-sided grid",
            ));
        }
        if direct && params.d == 3 && params.eps == 0.0 {
            return Err(Error::Divergence(
                "the unrenormalized action needs eps > 0 in three dimensions".into(),
            ));
        }
        let w = direct
            .then(|| GapKernel::build(KernelId::W, params, grid, settings))
            .transpose()?;
        let (rho, rho_dr) = if renormalized {
            (
                Some(GapKernel::build(KernelId::Rho, params, grid, settings)?),
                Some(GapKernel::build(KernelId::RhoDr, params, grid, settings)?),
            )
        } else {
            (None, None)
        };
        let rho_diag = match kernels::rho_diag(params, &settings.quad) {
            Ok(v) => Some(v),
            Err(Error::Divergence(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(NelsonKernels {
            params: params.clone(),
            grid: *grid,
            w,
            rho,
            rho_dr,
            rho_diag,
        })
    }

    /// Largest measured table interpolation error among the prepared kernels.
    pub fn table_error(&self) -> Option<f64> {
        [&self.w, &self.rho, &self.rho_dr]
            .iter()
            .filter_map(|k| k.as_ref().and_then(|g| g.table_error))
            .reduce(f64::max)
    }
}

/// Trapezoid weight of node `i` on a grid of `n` nodes (unit spacing).
#[inline]
pub fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}
