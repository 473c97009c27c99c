//! JSON summaries (17 significant digits) and CSV tables.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pimc_core::estimators::DiamagneticReport;
use pimc_core::paths::TimeGrid;
use pimc_core::polaron::KatoReport;
use pimc_core::{Model, ModelParams};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SweepParam, SweepValue};
use crate::error::{CliError, ErrorClass};

/// Compact JSON formatter writing every float as `d.dddddddddddddddde±x`.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize `value` as one line of JSON with 17 significant digits per float.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::io("json", e))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = to_json(value)?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

/// Analytic lower bound attached to an overlap estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBound {
    pub bound: f64,
    /// `gamma + 3 std_error >= bound`.
    pub bound_satisfied: bool,
}

/// One estimate, as written to `<name>[-<index>].json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: Command,
    pub model: Model,
    pub kind: String,
    pub mode: String,
    pub sweep_index: usize,
    pub sweep_param: Option<SweepParam>,
    pub sweep_value: Option<SweepValue>,
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub master_seed: u64,
    pub status: Status,
    pub error_class: Option<ErrorClass>,
    pub error: Option<String>,
    pub mean_re: Option<f64>,
    pub mean_im: Option<f64>,
    pub std_error: Option<f64>,
    pub std_error_re: Option<f64>,
    pub std_error_im: Option<f64>,
    pub params_fingerprint: Option<String>,
    pub wall_time_s: f64,
    pub collision_events: Option<u64>,
    pub weight_cap_hits: usize,
    pub max_log_weight: Option<f64>,
    pub table_error: Option<f64>,
    pub energy: Option<f64>,
    pub energy_std_error: Option<f64>,
    /// Paired difference of the real parts against the previous sweep point.
    pub diff_prev_re: Option<f64>,
    pub diff_prev_std_error: Option<f64>,
    pub gamma: Option<GammaBound>,
    pub diamagnetic: Option<DiamagneticReport>,
    pub kato: Option<KatoReport>,
    /// The resolved configuration of this point; rerunning it reproduces the estimate.
    pub config: RunConfig,
}

/// The part of a summary needed to rerun it.
#[derive(Debug, Clone, Deserialize)]
pub struct SummaryHead {
    pub command: Command,
    pub config: RunConfig,
}

pub fn read_summary(path: &Path) -> Result<SummaryHead, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(&format!("cannot read {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Row of `<name>.csv` for `estimate`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub index: usize,
    pub param: String,
    pub value: String,
    pub kind: String,
    pub mode: String,
    pub model: Model,
    pub d: usize,
    pub g: f64,
    pub lambda: f64,
    pub eps: f64,
    pub p: String,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub status: Status,
    pub mean_re: Option<f64>,
    pub mean_im: Option<f64>,
    pub std_error: Option<f64>,
    pub diff_re: Option<f64>,
    pub diff_std_error: Option<f64>,
    pub energy: Option<f64>,
    pub energy_std_error: Option<f64>,
    pub collision_events: Option<u64>,
    pub max_log_weight: Option<f64>,
    pub table_error: Option<f64>,
    pub error: String,
}

/// Row of `<name>-diamagnetic.csv`, one per momentum.
#[derive(Debug, Clone, Serialize)]
pub struct DiamagneticRow {
    pub index: usize,
    pub param: String,
    pub value: String,
    pub p: String,
    pub mean_re: f64,
    pub mean_im: f64,
    pub modulus: f64,
    pub reference: f64,
    pub ok: bool,
    pub energy: f64,
    pub energy_ok: bool,
}

/// Row of `<name>-kato.csv`, one per refinement level.
#[derive(Debug, Clone, Serialize)]
pub struct KatoRow {
    pub index: usize,
    pub param: String,
    pub value: String,
    pub dt: f64,
    pub n_steps: usize,
    pub mean_re: f64,
    pub std_error: f64,
    pub collision_events: u64,
    pub max_log_weight: f64,
    pub relative_drift: f64,
    pub stable: bool,
}

/// Row of `<name>.csv` for `gamma`.
#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub index: usize,
    pub param: String,
    pub value: String,
    pub d: usize,
    pub g: f64,
    pub lambda: f64,
    pub eps: f64,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub status: Status,
    pub gamma: Option<f64>,
    pub std_error: Option<f64>,
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub max_log_weight: Option<f64>,
    pub error: String,
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let ctx = format!("cannot write {}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(&ctx, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(&ctx, e))?;
    }
    w.flush().map_err(|e| CliError::io(&ctx, e))
}

pub fn output_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}{suffix}"))
}

pub const ESTIMATE_CSV_HELP: &str = "\
CSV columns of <name>.csv (one row per sweep point):
  index, param, value        sweep position, swept parameter and its value
  kind, mode, model          estimator, weight mode, model
  d, g, lambda, eps, p, t    model parameters (p as x:y:z)
  dt, n_paths, master_seed   grid step and Monte Carlo settings
  status                     ok or error
  mean_re, mean_im           Monte Carlo mean
  std_error                  standard error of the mean
  diff_re, diff_std_error    paired difference to the previous point (common random numbers)
  energy, energy_std_error   -ln(Re mean)/horizon for energy estimates
  collision_events           polaron near-collision count
  max_log_weight             largest per-path log-weight
  table_error                measured kernel table error
  error                      failure reason, empty on success
Diamagnetic runs add <name>-diamagnetic.csv
  (index, param, value, p, mean_re, mean_im, modulus, reference, ok, energy, energy_ok)
and Kato stress runs add <name>-kato.csv
  (index, param, value, dt, n_steps, mean_re, std_error, collision_events, max_log_weight,
   relative_drift, stable).";

pub const GAMMA_CSV_HELP: &str = "\
CSV columns of <name>.csv (one row per sweep point):
  index, param, value                 sweep position, swept parameter and its value
  d, g, lambda, eps, t, dt            model and grid
  n_paths, master_seed, status        Monte Carlo settings and ok/error
  gamma, std_error                    overlap estimate and delta-method error
  bound, bound_satisfied              analytic lower bound and gamma + 3 se >= bound
  max_log_weight, error               largest log-weight and failure reason";
