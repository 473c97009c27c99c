//! Vacuum expectations, overlaps, energies and the diamagnetic check.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::actions::{action_direct, action_direct_halves, action_renormalized};
use super::{KernelSettings, McConfig, NelsonKernels};
use crate::error::{Error, Result};
use crate::estimate::{fingerprint, mean_and_se, ratio_estimate, MCEstimate};
use crate::params::{Model, ModelParams};
use crate::paths::{sample_path, PathSeed, TimeGrid};

/// Which action enters the path weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VacuumMode {
    /// `e^{(g^2/2) S_eps}` (needs `eps > 0` in three dimensions).
    Direct,
    /// `e^{(g^2/2) S_eps^ren}` with window `tau`; `None` means `tau = 2T`.
    Renormalized { tau: Option<f64> },
}

impl VacuumMode {
    pub fn renormalized() -> Self {
        VacuumMode::Renormalized { tau: None }
    }
}

/// Per-path ingredients of a vacuum-type estimate.
#[derive(Debug, Clone)]
pub struct PathWeights {
    pub log_weights: Vec<f64>,
    /// `B_T - B_{-T}` per path.
    pub increments: Vec<Vec<f64>>,
}

/// A vacuum expectation with its per-path samples (for paired comparisons).
#[derive(Debug, Clone)]
pub struct VacuumRun {
    pub estimate: MCEstimate,
    pub samples: Vec<Complex64>,
    pub max_log_weight: f64,
    pub table_error: Option<f64>,
}

pub(crate) fn check_cap(log_weights: &[f64], cap: f64) -> Result<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let hits = log_weights.iter().filter(|&&l| !(l <= cap)).count();
    if hits > 0 {
        return Err(Error::WeightCap {
            cap,
            hits,
            max_log_weight: max,
        });
    }
    Ok(max)
}

/// Kernels needed for `mode`, or `None` when `g = 0` makes every weight 1.
pub fn prepare_kernels(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    settings: &KernelSettings,
) -> Result<Option<NelsonKernels>> {
    params.require_model(Model::Nelson)?;
    params.validate()?;
    if params.g == 0.0 {
        return Ok(None);
    }
    let span = grid.span();
    let (direct, renorm) = match mode {
        VacuumMode::Direct => (true, false),
        VacuumMode::Renormalized { tau } => {
            let tau = tau.unwrap_or(span);
            let needs_w = ((tau / grid.dt()).round() as usize) < 2 * grid.n_half;
            (needs_w, true)
        }
    };
    NelsonKernels::build(params, grid, direct, renorm, settings).map(Some)
}

/// `(g^2/2) S` for one path under `mode`.
pub fn log_weight(
    path: &crate::paths::BrownianPath,
    kernels: &NelsonKernels,
    mode: VacuumMode,
) -> Result<f64> {
    let g2 = kernels.params.g * kernels.params.g;
    let s = match mode {
        VacuumMode::Direct => action_direct(path, kernels)?,
        VacuumMode::Renormalized { tau } => {
            action_renormalized(path, kernels, tau.unwrap_or(path.grid.span()))?.total
        }
    };
    Ok(0.5 * g2 * s)
}

/// Sample `mc.n_paths` paths and return their log-weights and endpoint
/// increments, in path-index order.
pub fn path_weights(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    kernels: Option<&NelsonKernels>,
) -> Result<PathWeights> {
    mc.validate()?;
    if params.g != 0.0 && kernels.is_none() {
        return Err(Error::invalid("g != 0 needs prepared kernels"));
    }
    let rows: Vec<(f64, Vec<f64>)> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|idx| {
            let path = sample_path(grid, params.d, PathSeed::new(mc.master_seed, idx))?;
            let lw = match kernels {
                Some(k) if params.g != 0.0 => log_weight(&path, k, mode)?,
                _ => 0.0,
            };
            Ok((lw, path.endpoint_increment()))
        })
        .collect::<Result<_>>()?;
    let (log_weights, increments) = rows.into_iter().unzip();
    Ok(PathWeights {
        log_weights,
        increments,
    })
}

/// `e^{i P . dB} e^{lw}`; exactly real when `P = 0`.
#[inline]
pub(crate) fn phase_weight(p: &[f64], increment: &[f64], lw: f64) -> Complex64 {
    let w = lw.exp();
    let theta: f64 = p.iter().zip(increment).map(|(a, b)| a * b).sum();
    if theta == 0.0 {
        Complex64::new(w, 0.0)
    } else {
        Complex64::new(w * theta.cos(), w * theta.sin())
    }
}

fn vacuum_fingerprint(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> String {
    fingerprint(&("nelson_vacuum", params, mode, grid, mc, settings))
}

/// Monte Carlo estimate of `E[e^{i P . (B_T - B_{-T})} e^{(g^2/2) S}]`.
pub fn vacuum_expectation(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> Result<VacuumRun> {
    let kernels = prepare_kernels(params, mode, grid, settings)?;
    vacuum_with_kernels(params, mode, grid, mc, settings, kernels.as_ref())
}

/// [`vacuum_expectation`] with kernels prepared by the caller.
pub fn vacuum_with_kernels(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
    kernels: Option<&NelsonKernels>,
) -> Result<VacuumRun> {
    let pw = path_weights(params, mode, grid, mc, kernels)?;
    let max_log_weight = check_cap(&pw.log_weights, mc.log_weight_cap)?;
    let samples: Vec<Complex64> = pw
        .log_weights
        .iter()
        .zip(&pw.increments)
        .map(|(&lw, inc)| phase_weight(&params.p, inc, lw))
        .collect();
    let estimate = MCEstimate::from_samples(
        &samples,
        mc.master_seed,
        vacuum_fingerprint(params, mode, grid, mc, settings),
    )?;
    Ok(VacuumRun {
        estimate,
        samples,
        max_log_weight,
        table_error: kernels.and_then(|k| k.table_error()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub estimate: MCEstimate,
    pub max_log_weight: f64,
}

/// Ground-state overlap `gamma(T) = (1, e^{-TH} 1)^2 / (1, e^{-2TH} 1)` as a
/// ratio of two means over the same paths: numerator weight
/// `e^{(g^2/2)(S_-- + S_++)}`, denominator `e^{(g^2/2) S}`.
pub fn gamma_overlap(
    params: &ModelParams,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> Result<GammaEstimate> {
    params.require_model(Model::Nelson)?;
    params.validate()?;
    mc.validate()?;
    if !params.is_p_zero() {
        return Err(Error::invalid("the overlap estimator needs P = 0"));
    }
    let fp = fingerprint(&("nelson_gamma", params, grid, mc, settings));
    if params.g == 0.0 {
        return Ok(GammaEstimate {
            estimate: MCEstimate::real(1.0, 0.0, mc.n_paths, mc.master_seed, fp),
            max_log_weight: 0.0,
        });
    }
    let kernels = NelsonKernels::build(params, grid, true, false, settings)?;
    let half_g2 = 0.5 * params.g * params.g;
    let rows: Vec<(f64, f64)> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|idx| {
            let path = sample_path(grid, params.d, PathSeed::new(mc.master_seed, idx))?;
            let (aa, bb, ab) = action_direct_halves(&path, &kernels)?;
            Ok((half_g2 * (aa + bb), half_g2 * (aa + bb + 2.0 * ab)))
        })
        .collect::<Result<_>>()?;
    let (num, den): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let max_num = check_cap(&num, mc.log_weight_cap)?;
    let max_den = check_cap(&den, mc.log_weight_cap)?;
    // common shift; it cancels in the ratio
    let shift = max_num.max(max_den);
    let x: Vec<f64> = num.iter().map(|l| (l - shift).exp()).collect();
    let y: Vec<f64> = den.iter().map(|l| (l - shift).exp()).collect();
    let (r, se) = ratio_estimate(&x, &y)?;
    Ok(GammaEstimate {
        estimate: MCEstimate::real(r, se, mc.n_paths, mc.master_seed, fp),
        max_log_weight: max_num.max(max_den),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// `-ln(Re mean) / horizon` (`2T` for two-sided runs).
    pub energy: f64,
    /// Delta-method standard error.
    pub std_error: f64,
    pub vacuum: MCEstimate,
}

/// Energy from a vacuum estimate over the two-sided horizon `2T`.
pub fn energy_from_vacuum(vacuum: &MCEstimate, t: f64) -> Result<EnergyEstimate> {
    energy_over_horizon(vacuum, 2.0 * t)
}

/// `-ln(Re mean) / horizon` with its delta-method standard error.
pub fn energy_over_horizon(vacuum: &MCEstimate, horizon: f64) -> Result<EnergyEstimate> {
    let m = vacuum.mean.re;
    if !(m > 0.0) {
        return Err(Error::NonPositiveMean(m));
    }
    Ok(EnergyEstimate {
        energy: -m.ln() / horizon,
        std_error: vacuum.std_error_re / (horizon * m),
        vacuum: vacuum.clone(),
    })
}

/// `E(P, T) = -ln(Re <vacuum>) / (2T)`.
pub fn energy(
    params: &ModelParams,
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> Result<EnergyEstimate> {
    let run = vacuum_expectation(params, mode, grid, mc, settings)?;
    energy_from_vacuum(&run.estimate, grid.t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticEntry {
    pub p: Vec<f64>,
    pub mean: Complex64,
    pub modulus: f64,
    /// `|V(P)| <= V(0)` evaluated on the estimator.
    pub ok: bool,
    /// `-ln(Re V(P)) / horizon`; `+inf` when `Re V(P) <= 0`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticReport {
    /// `V(0)`, the mean of the shared positive weights.
    pub reference: f64,
    pub reference_energy: f64,
    pub entries: Vec<DiamagneticEntry>,
    pub all_ok: bool,
    /// `E(0) <= E(P)` for every entry.
    pub energy_order_ok: bool,
}

/// Evaluate `V(P) = mean_k e^{i P . dB_k} w_k` for each `P` with the same
/// positive weights `w_k` and compare against `V(0) = mean_k w_k`. Energies
/// are `-ln(Re V) / horizon` with `horizon` the full time span of the paths.
pub fn diamagnetic_from_weights(
    pw: &PathWeights,
    momenta: &[Vec<f64>],
    horizon: f64,
) -> Result<DiamagneticReport> {
    let n = pw.log_weights.len() as f64;
    let zero = vec![0.0; pw.increments.first().map_or(0, |v| v.len())];
    let mean_for = |p: &[f64]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&lw, inc) in pw.log_weights.iter().zip(&pw.increments) {
            acc += phase_weight(p, inc, lw);
        }
        acc / n
    };
    let reference = mean_for(&zero).re;
    if !(reference > 0.0) {
        return Err(Error::NonPositiveMean(reference));
    }
    let reference_energy = -reference.ln() / horizon;
    let entries: Vec<DiamagneticEntry> = momenta
        .iter()
        .map(|p| {
            let mean = mean_for(p);
            let modulus = mean.norm();
            let energy = if mean.re > 0.0 {
                -mean.re.ln() / horizon
            } else {
                f64::INFINITY
            };
            DiamagneticEntry {
                p: p.clone(),
                mean,
                modulus,
                ok: modulus <= reference,
                energy,
            }
        })
        .collect();
    Ok(DiamagneticReport {
        reference,
        reference_energy,
        all_ok: entries.iter().all(|e| e.ok),
        energy_order_ok: entries.iter().all(|e| reference_energy <= e.energy),
        entries,
    })
}

/// Diamagnetic comparison over a list of parameter sets differing only in `P`.
pub fn diamagnetic_check(
    params_list: &[ModelParams],
    mode: VacuumMode,
    grid: &TimeGrid,
    mc: &McConfig,
    settings: &KernelSettings,
) -> Result<DiamagneticReport> {
    let first = params_list
        .first()
        .ok_or_else(|| Error::invalid("diamagnetic check needs at least one momentum"))?;
    let base = first.with_p(&vec![0.0; first.d]);
    for p in params_list {
        if p.with_p(&vec![0.0; p.d]) != base {
            return Err(Error::invalid(
                "diamagnetic check needs parameter sets that differ only in P",
            ));
        }
    }
    let kernels = prepare_kernels(&base, mode, grid, settings)?;
    let pw = path_weights(&base, mode, grid, mc, kernels.as_ref())?;
    check_cap(&pw.log_weights, mc.log_weight_cap)?;
    let momenta: Vec<Vec<f64>> = params_list.iter().map(|p| p.p.clone()).collect();
    diamagnetic_from_weights(&pw, &momenta, grid.span())
}

/// Plain mean and standard error of the real parts of run samples.
pub fn real_parts(samples: &[Complex64]) -> (f64, f64) {
    let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
    mean_and_se(&re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_mc(n: usize) -> McConfig {
        McConfig {
            n_paths: n,
            master_seed: 11,
            ..McConfig::default()
        }
    }

    #[test]
    fn free_field_gaussian_characteristic_function() {
        let g = TimeGrid::two_sided(1.0, 8).unwrap();
        let p = ModelParams::nelson(3, 0.0, 1.0, 0.5, 1.0).with_p(&[1.0, 0.0, 0.0]);
        let run = vacuum_expectation(
            &p,
            VacuumMode::Direct,
            &g,
            &quick_mc(20_000),
            &KernelSettings::default(),
        )
        .unwrap();
        let want = (-1.0f64).exp();
        assert!((run.estimate.mean.re - want).abs() < 4.0 * run.estimate.std_error_re);
        let e = energy_from_vacuum(&run.estimate, 1.0).unwrap();
        assert!((e.energy - 0.5).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn zero_coupling_gamma_is_one() {
        let g = TimeGrid::two_sided(1.0, 8).unwrap();
        let p = ModelParams::nelson(2, 0.0, 1.0, 0.0, 1.0);
        let r = gamma_overlap(&p, &g, &quick_mc(10), &KernelSettings::default()).unwrap();
        assert_eq!(r.estimate.mean.re, 1.0);
        assert!(gamma_overlap(
            &p.with_p(&[1.0, 0.0]),
            &g,
            &quick_mc(10),
            &KernelSettings::default()
        )
        .is_err());
    }

    #[test]
    fn weight_cap_is_enforced() {
        let g = TimeGrid::two_sided(1.0, 4).unwrap();
        let p = ModelParams::nelson(3, 3.0, 1.0, 0.05, 1.0);
        let mc = McConfig {
            log_weight_cap: 1.0,
            ..quick_mc(8)
        };
        let settings = KernelSettings {
            n_r: 64,
            n_tau: 32,
            validation_probes: 50,
            max_table_error: 0.1,
            ..KernelSettings::default()
        };
        let e = vacuum_expectation(&p, VacuumMode::Direct, &g, &mc, &settings).unwrap_err();
        assert!(matches!(e, Error::WeightCap { .. }));
    }

    #[test]
    fn nonpositive_mean_energy_is_an_error() {
        let est = MCEstimate::real(-0.1, 0.01, 10, 0, String::new());
        assert!(matches!(
            energy_from_vacuum(&est, 1.0),
            Err(Error::NonPositiveMean(_))
        ));
    }
}
