//! Polaron path functionals on the forward horizon `[0, T]`.
//!
//! The pair potential factorizes as `W^pol(r, t) = e^{-|t|} W^pol(r, 0)`, so
//! only the radial profile at `t = 0` is tabulated and the time factor is
//! applied exactly. With `eps = 0` the profile has a `pi^2 / r` singularity:
//! the `i = j` terms are left out of the double sum and off-diagonal pairs
//! closer than `r_min` are evaluated at `r_min` and counted.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fingerprint, paired_difference, MCEstimate};
use crate::estimators::trapezoid_weight;
use crate::estimators::vacuum::{check_cap, diamagnetic_from_weights, phase_weight, PathWeights};
use crate::estimators::{DiamagneticReport, KernelSettings, McConfig};
use crate::kernels::{self, KernelId};
use crate::params::{Model, ModelParams};
use crate::paths::{sample_path, BrownianPath, PathSeed, TimeGrid};
use crate::table::{KernelTable, RadialSlice};

/// Which polaron kernel enters the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolaronMode {
    /// `eps > 0`: the diagonal `W^pol_eps(0, 0)` is finite and included.
    Regularized,
    /// `eps = 0` with infrared cutoff `lambda >= 0`.
    Unregularized,
    /// `eps = 0`, `lambda = 0`: the closed form `pi^2 e^{-|t|} / r`.
    IrLimit,
}

impl PolaronMode {
    /// The mode implied by `eps` and `lambda`.
    pub fn for_params(params: &ModelParams) -> Self {
        if params.eps > 0.0 {
            PolaronMode::Regularized
        } else if params.lambda == 0.0 {
            PolaronMode::IrLimit
        } else {
            PolaronMode::Unregularized
        }
    }

    fn check(self, params: &ModelParams) -> Result<()> {
        let ok = match self {
            PolaronMode::Regularized => params.eps > 0.0,
            PolaronMode::Unregularized => params.eps == 0.0,
            PolaronMode::IrLimit => params.eps == 0.0 && params.lambda == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "polaron mode {self:?} does not match eps = {}, lambda = {}",
                params.eps, params.lambda
            )))
        }
    }
}

/// A polaron Monte Carlo run: forward paths on a one-sided grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaronRun {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub mc: McConfig,
    /// Collision floor; `None` means `1e-6 sqrt(T)`.
    pub r_min: Option<f64>,
}

impl PolaronRun {
    pub fn new(params: ModelParams, grid: TimeGrid, mc: McConfig) -> Result<Self> {
        let run = PolaronRun {
            params,
            grid,
            mc,
            r_min: None,
        };
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.require_model(Model::Polaron)?;
        self.params.validate()?;
        self.mc.validate()?;
        if self.grid.two_sided {
            return Err(Error::invalid(
                "polaron runs use a one-sided grid on [0, T]",
            ));
        }
        if self.grid.t != self.params.t {
            return Err(Error::invalid(format!(
                "grid horizon {} differs from params.t = {}",
                self.grid.t, self.params.t
            )));
        }
        if let Some(r) = self.r_min {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("r_min must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn r_min(&self) -> f64 {
        self.r_min.unwrap_or(1e-6 * self.params.t.sqrt())
    }

    /// The same run on a grid with step `dt`.
    pub fn with_step(&self, dt: f64) -> Result<Self> {
        Ok(PolaronRun {
            grid: TimeGrid::with_step(self.params.t, dt, false)?,
            ..self.clone()
        })
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        PolaronRun {
            params,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Profile {
    IrLimit,
    Slice(RadialSlice),
}

/// The radial profile `W^pol(r, 0)` plus the diagonal value when finite.
#[derive(Debug, Clone)]
pub struct PolaronKernel {
    pub mode: PolaronMode,
    profile: Profile,
    diagonal: Option<f64>,
    /// Measured interpolation error of the underlying table, if any.
    pub table_error: Option<f64>,
}

impl PolaronKernel {
    pub fn build(
        params: &ModelParams,
        mode: PolaronMode,
        grid: &TimeGrid,
        settings: &KernelSettings,
    ) -> Result<Self> {
        params.require_model(Model::Polaron)?;
        params.validate()?;
        mode.check(params)?;
        let diagonal = if params.eps > 0.0 {
            Some(kernels::polaron_w(0.0, 0.0, params, &settings.quad)?)
        } else {
            None
        };
        let (profile, table_error) = match mode {
            PolaronMode::IrLimit => (Profile::IrLimit, None),
            _ if settings.use_tables => {
                let spec = settings.table_spec(grid, 3);
                let table = KernelTable::build(params, KernelId::PolaronW, &spec, &settings.quad)?;
                (
                    Profile::Slice(table.slice(0.0)),
                    Some(table.interp_error_bound),
                )
            }
            _ => (
                Profile::Slice(RadialSlice::direct(
                    KernelId::PolaronW,
                    params,
                    &settings.quad,
                    0.0,
                )),
                None,
            ),
        };
        Ok(PolaronKernel {
            mode,
            profile,
            diagonal,
            table_error,
        })
    }

    /// `W^pol(r, 0)` for `r > 0`.
    #[inline]
    pub fn radial(&self, r: f64) -> Result<f64> {
        match &self.profile {
            Profile::IrLimit => Ok(PI * PI / r),
            Profile::Slice(s) => s.eval(r),
        }
    }

    /// `W^pol(r, t) = e^{-|t|} W^pol(r, 0)`.
    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        if r == 0.0 {
            if let Some(d) = self.diagonal {
                return Ok((-t.abs()).exp() * d);
            }
        }
        Ok((-t.abs()).exp() * self.radial(r)?)
    }

    /// `W^pol(0, 0)` when finite (`eps > 0`).
    pub fn diagonal(&self) -> Option<f64> {
        self.diagonal
    }
}

/// The polaron action of one path with its near-collision count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaronAction {
    pub value: f64,
    /// Off-diagonal pairs with `|B_i - B_j| < r_min`, each evaluated at `r_min`.
    pub collisions: u64,
}

/// `S^pol = int_0^T int_0^T W^pol(B_t - B_s, t - s) ds dt` as a trapezoid
/// double sum.
pub fn polaron_action(
    path: &BrownianPath,
    kernel: &PolaronKernel,
    r_min: f64,
) -> Result<PolaronAction> {
    if path.grid.two_sided || path.d != 3 {
        return Err(Error::invalid(
            "polaron paths are one-sided and three-dimensional",
        ));
    }
    let n = path.n_nodes();
    let dt = path.grid.dt();
    let decay: Vec<f64> = (0..n).map(|m| (-(m as f64) * dt).exp()).collect();
    let mut collisions = 0u64;
    let mut sum = 0.0;
    for i in 0..n {
        let wi = trapezoid_weight(i, n);
        let mut row = 0.0;
        for j in i + 1..n {
            let mut r = path.distance(i, j);
            if r < r_min {
                collisions += 1;
                r = r_min;
            }
            row += trapezoid_weight(j, n) * (decay[j - i] * kernel.radial(r)?);
        }
        sum += 2.0 * wi * row;
        if let Some(d) = kernel.diagonal {
            sum += wi * wi * d;
        }
    }
    Ok(PolaronAction {
        value: dt * dt * sum,
        collisions,
    })
}

/// Per-path log-weights `(g^2/2) S^pol`, endpoints `B_T` and the total
/// number of near-collision events.
pub fn polaron_weights(
    run: &PolaronRun,
    kernel: Option<&PolaronKernel>,
) -> Result<(PathWeights, u64)> {
    run.validate()?;
    let half_g2 = 0.5 * run.params.g * run.params.g;
    if half_g2 != 0.0 && kernel.is_none() {
        return Err(Error::invalid("g != 0 needs a prepared polaron kernel"));
    }
    let r_min = run.r_min();
    let rows: Vec<(f64, Vec<f64>, u64)> = (0..run.mc.n_paths as u64)
        .into_par_iter()
        .map(|idx| {
            let path = sample_path(&run.grid, 3, PathSeed::new(run.mc.master_seed, idx))?;
            let (lw, hits) = match kernel {
                Some(k) if half_g2 != 0.0 => {
                    let a = polaron_action(&path, k, r_min)?;
                    (half_g2 * a.value, a.collisions)
                }
                _ => (0.0, 0),
            };
            Ok((lw, path.endpoint_increment(), hits))
        })
        .collect::<Result<_>>()?;
    let mut log_weights = Vec::with_capacity(rows.len());
    let mut increments = Vec::with_capacity(rows.len());
    let mut collisions = 0u64;
    for (lw, inc, hits) in rows {
        log_weights.push(lw);
        increments.push(inc);
        collisions += hits;
    }
    Ok((
        PathWeights {
            log_weights,
            increments,
        },
        collisions,
    ))
}

/// A polaron vacuum expectation with its per-path samples.
#[derive(Debug, Clone)]
pub struct PolaronVacuum {
    pub mode: PolaronMode,
    pub estimate: MCEstimate,
    pub samples: Vec<Complex64>,
    pub collision_events: u64,
    pub max_log_weight: f64,
    pub table_error: Option<f64>,
}

fn prepare(
    run: &PolaronRun,
    mode: PolaronMode,
    settings: &KernelSettings,
) -> Result<Option<PolaronKernel>> {
    run.validate()?;
    mode.check(&run.params)?;
    if run.params.g == 0.0 {
        return Ok(None);
    }
    PolaronKernel::build(&run.params, mode, &run.grid, settings).map(Some)
}

/// Monte Carlo estimate of `E[e^{i P . B_T} e^{(g^2/2) S^pol}]` over forward
/// paths. No counterterm is applied in any mode.
pub fn polaron_vacuum(
    run: &PolaronRun,
    mode: PolaronMode,
    settings: &KernelSettings,
) -> Result<PolaronVacuum> {
    let kernel = prepare(run, mode, settings)?;
    let (pw, collision_events) = polaron_weights(run, kernel.as_ref())?;
    let max_log_weight = check_cap(&pw.log_weights, run.mc.log_weight_cap)?;
    let samples: Vec<Complex64> = pw
        .log_weights
        .iter()
        .zip(&pw.increments)
        .map(|(&lw, inc)| phase_weight(&run.params.p, inc, lw))
        .collect();
    let fp = fingerprint(&("polaron_vacuum", run, mode, settings));
    Ok(PolaronVacuum {
        mode,
        estimate: MCEstimate::from_samples(&samples, run.mc.master_seed, fp)?,
        samples,
        collision_events,
        max_log_weight,
        table_error: kernel.and_then(|k| k.table_error),
    })
}

/// Diamagnetic comparison `|V(P)| <= V(0)` on shared polaron weights.
pub fn polaron_diamagnetic(
    run: &PolaronRun,
    mode: PolaronMode,
    momenta: &[Vec<f64>],
    settings: &KernelSettings,
) -> Result<DiamagneticReport> {
    let base = run.with_params(run.params.with_p(&[0.0; 3]));
    let kernel = prepare(&base, mode, settings)?;
    let (pw, _) = polaron_weights(&base, kernel.as_ref())?;
    check_cap(&pw.log_weights, base.mc.log_weight_cap)?;
    diamagnetic_from_weights(&pw, momenta, run.grid.span())
}

/// One refinement level of the exponential-moment stress test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoLevel {
    pub dt: f64,
    pub n_steps: usize,
    pub estimate: MCEstimate,
    pub collision_events: u64,
    pub max_log_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoReport {
    pub levels: Vec<KatoLevel>,
    /// `|V_finest - V_previous| / V_previous`.
    pub relative_drift: f64,
    /// Paired standard error of the finest difference, relative to `V_previous`.
    pub drift_std_error: f64,
    pub threshold: f64,
    /// `relative_drift < threshold`.
    pub stable: bool,
    /// Every refinement raised the estimate by more than three paired standard errors.
    pub systematic_growth: bool,
}

/// Estimate `E[e^{(g^2/2) S^pol_0}]` in the infrared limit at each step in
/// `dts` (same seeds, so the paths are refinements of each other) and report
/// whether the sequence settles.
pub fn kato_moment_stress(
    run: &PolaronRun,
    dts: &[f64],
    threshold: f64,
    settings: &KernelSettings,
) -> Result<KatoReport> {
    if dts.len() < 2 {
        return Err(Error::invalid(
            "the stress test needs at least two refinement levels",
        ));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("the drift threshold must be positive"));
    }
    let mut levels = Vec::with_capacity(dts.len());
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(dts.len());
    for &dt in dts {
        let level_run = run.with_step(dt)?;
        let v = polaron_vacuum(&level_run, PolaronMode::IrLimit, settings)?;
        samples.push(v.samples.iter().map(|z| z.re).collect());
        levels.push(KatoLevel {
            dt: level_run.grid.dt(),
            n_steps: level_run.grid.n_half,
            estimate: v.estimate,
            collision_events: v.collision_events,
            max_log_weight: v.max_log_weight,
        });
    }
    let k = levels.len();
    let prev = levels[k - 2].estimate.mean.re;
    let (diff, diff_se) = paired_difference(&samples[k - 1], &samples[k - 2])?;
    let relative_drift = diff.abs() / prev;
    let mut systematic_growth = true;
    for w in samples.windows(2) {
        let (d, se) = paired_difference(&w[1], &w[0])?;
        systematic_growth &= d > 3.0 * se;
    }
    Ok(KatoReport {
        levels,
        relative_drift,
        drift_std_error: diff_se / prev,
        threshold,
        stable: relative_drift < threshold,
        systematic_growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(n: usize) -> McConfig {
        McConfig {
            n_paths: n,
            master_seed: 5,
            ..McConfig::default()
        }
    }

    #[test]
    fn mode_must_match_parameters() {
        let p = ModelParams::polaron(1.0, 1.0, 0.0, 1.0);
        assert_eq!(PolaronMode::for_params(&p), PolaronMode::Unregularized);
        assert_eq!(
            PolaronMode::for_params(&p.with_lambda(0.0)),
            PolaronMode::IrLimit
        );
        assert_eq!(
            PolaronMode::for_params(&p.with_eps(0.5)),
            PolaronMode::Regularized
        );
        assert!(PolaronMode::IrLimit.check(&p).is_err());
        assert!(PolaronMode::Regularized.check(&p).is_err());
    }

    #[test]
    fn run_rejects_two_sided_grid_and_nelson_params() {
        let p = ModelParams::polaron(1.0, 1.0, 0.0, 1.0);
        assert!(PolaronRun::new(p.clone(), TimeGrid::two_sided(1.0, 4).unwrap(), mc(4)).is_err());
        assert!(PolaronRun::new(p.clone(), TimeGrid::one_sided(2.0, 4).unwrap(), mc(4)).is_err());
        let n = ModelParams::nelson(3, 1.0, 1.0, 0.5, 1.0);
        assert!(PolaronRun::new(n, TimeGrid::one_sided(1.0, 4).unwrap(), mc(4)).is_err());
        let run = PolaronRun::new(p, TimeGrid::one_sided(1.0, 4).unwrap(), mc(4)).unwrap();
        assert_eq!(run.r_min(), 1e-6);
    }

    #[test]
    fn ir_kernel_is_inverse_distance() {
        let p = ModelParams::polaron(1.0, 0.0, 0.0, 1.0);
        let g = TimeGrid::one_sided(1.0, 4).unwrap();
        let k =
            PolaronKernel::build(&p, PolaronMode::IrLimit, &g, &KernelSettings::default()).unwrap();
        for (r, t) in [(0.5, 0.0f64), (2.0, 0.3), (0.01, 1.0)] {
            let want = PI * PI * (-t).exp() / r;
            assert!((k.eval(r, t).unwrap() - want).abs() <= 1e-15 * want);
        }
        assert!(k.diagonal().is_none());
    }

    #[test]
    fn collisions_are_floored_and_counted() {
        let p = ModelParams::polaron(1.0, 0.0, 0.0, 1.0);
        let g = TimeGrid::one_sided(1.0, 4).unwrap();
        let k =
            PolaronKernel::build(&p, PolaronMode::IrLimit, &g, &KernelSettings::default()).unwrap();
        let z = BrownianPath::zero(&g, 3).unwrap();
        let a = polaron_action(&z, &k, 0.5).unwrap();
        assert_eq!(a.collisions, 10);
        // every pair at r_min: dt^2 sum_{i != j} w_i w_j e^{-|i-j| dt} pi^2 / r_min
        let dt = 0.25;
        let mut want = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    let w = |k: usize| if k == 0 || k == 4 { 0.5 } else { 1.0 };
                    want += w(i) * w(j) * (-(i as f64 - j as f64).abs() * dt).exp();
                }
            }
        }
        want *= dt * dt * PI * PI / 0.5;
        assert!((a.value - want).abs() < 1e-12 * want);
    }

    #[test]
    fn zero_coupling_stress_levels_are_exactly_one() {
        let p = ModelParams::polaron(0.0, 0.0, 0.0, 0.5);
        let run = PolaronRun::new(p, TimeGrid::one_sided(0.5, 8).unwrap(), mc(16)).unwrap();
        let rep = kato_moment_stress(
            &run,
            &[1.0 / 16.0, 1.0 / 32.0],
            0.02,
            &KernelSettings::default(),
        )
        .unwrap();
        for l in &rep.levels {
            assert_eq!(l.estimate.mean, Complex64::new(1.0, 0.0));
            assert_eq!(l.collision_events, 0);
        }
        assert!(rep.stable);
        assert_eq!(rep.relative_drift, 0.0);
    }
}
