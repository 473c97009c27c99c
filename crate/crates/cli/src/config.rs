//! Run configuration: a versioned TOML file, flag overrides and sweep expansion.

use std::fmt;
use std::path::{Path, PathBuf};

use pimc_core::estimators::{KernelSettings, McConfig, Profile, VacuumMode};
use pimc_core::paths::TimeGrid;
use pimc_core::polaron::{PolaronMode, PolaronRun};
use pimc_core::{Model, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub grid: GridSection,
    pub mc: McSection,
    pub estimator: EstimatorSection,
    pub coherent: CoherentSection,
    pub kernels: KernelSettings,
    pub sweep: Option<SweepSection>,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            model: ModelSection::default(),
            grid: GridSection::default(),
            mc: McSection::default(),
            estimator: EstimatorSection::default(),
            coherent: CoherentSection::default(),
            kernels: KernelSettings::default(),
            sweep: None,
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub model: Model,
    pub d: usize,
    pub g: f64,
    pub lambda: f64,
    pub eps: f64,
    /// Total momentum; the zero vector when absent.
    pub p: Option<Vec<f64>>,
    pub t: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            model: Model::Nelson,
            d: 3,
            g: 0.5,
            lambda: 1.0,
            eps: 0.5,
            p: None,
            t: 1.0,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        let d = if self.model == Model::Polaron {
            3
        } else {
            self.d
        };
        ModelParams {
            model: self.model,
            d,
            g: self.g,
            lambda: self.lambda,
            eps: self.eps,
            p: self.p.clone().unwrap_or_else(|| vec![0.0; d]),
            t: self.t,
        }
    }
}

/// Uniform time step; `n_half` (steps per half-line) takes precedence over `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dt: f64,
    pub n_half: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dt: 1.0 / 64.0,
            n_half: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub master_seed: u64,
    pub log_weight_cap: f64,
    /// Polaron collision floor; `1e-6 sqrt(T)` when absent.
    pub r_min: Option<f64>,
}

impl Default for McSection {
    fn default() -> Self {
        let mc = McConfig::default();
        McSection {
            n_paths: mc.n_paths,
            master_seed: mc.master_seed,
            log_weight_cap: mc.log_weight_cap,
            r_min: None,
        }
    }
}

impl McSection {
    pub fn mc(&self) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            master_seed: self.master_seed,
            log_weight_cap: self.log_weight_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Vacuum,
    Energy,
    Diamagnetic,
    Coherent,
    Kato,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    /// Nelson: renormalized; polaron: chosen from eps and lambda.
    Auto,
    Direct,
    Renormalized,
    Regularized,
    Unregularized,
    IrLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub mode: ModeChoice,
    /// Window of the renormalized action; `2T` when absent.
    pub tau: Option<f64>,
    /// Momenta of a diamagnetic comparison.
    pub momenta: Vec<Vec<f64>>,
    pub kato_dts: Vec<f64>,
    pub kato_threshold: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            kind: EstimatorKind::Vacuum,
            mode: ModeChoice::Auto,
            tau: None,
            momenta: Vec::new(),
            kato_dts: vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
            kato_threshold: 0.02,
        }
    }
}

impl EstimatorSection {
    pub fn nelson_mode(&self) -> Result<VacuumMode, CliError> {
        match self.mode {
            ModeChoice::Auto | ModeChoice::Renormalized => {
                Ok(VacuumMode::Renormalized { tau: self.tau })
            }
            ModeChoice::Direct => Ok(VacuumMode::Direct),
            other => Err(CliError::config(format!(
                "mode {other:?} is not a Nelson mode"
            ))),
        }
    }

    pub fn polaron_mode(&self, params: &ModelParams) -> Result<PolaronMode, CliError> {
        match self.mode {
            ModeChoice::Auto => Ok(PolaronMode::for_params(params)),
            ModeChoice::Regularized => Ok(PolaronMode::Regularized),
            ModeChoice::Unregularized => Ok(PolaronMode::Unregularized),
            ModeChoice::IrLimit => Ok(PolaronMode::IrLimit),
            other => Err(CliError::config(format!(
                "mode {other:?} is not a polaron mode"
            ))),
        }
    }
}

/// Exponential-vector parameters of the coherent estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentSection {
    /// `[re, im]`
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub rho1: Profile,
    pub rho2: Profile,
}

impl Default for CoherentSection {
    fn default() -> Self {
        let gaussian = Profile::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        };
        CoherentSection {
            alpha: [0.0; 2],
            beta: [0.0; 2],
            rho1: gaussian,
            rho2: gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Eps,
    Lambda,
    Dt,
    T,
    P,
    G,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepParam::Eps => "eps",
            SweepParam::Lambda => "lambda",
            SweepParam::Dt => "dt",
            SweepParam::T => "t",
            SweepParam::P => "p",
            SweepParam::G => "g",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Scalar(v) => write!(f, "{v}"),
            SweepValue::Vector(v) => f.write_str(&join_vector(v)),
        }
    }
}

/// `1:0:0` style rendering of a vector for CSV cells.
pub fn join_vector(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<SweepValue>,
    /// Reuse the master seed at every point (paired differences); otherwise
    /// point `i` uses `master_seed + i`.
    #[serde(default = "yes")]
    pub common_random_numbers: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// File stem of every output file.
    pub name: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("pimc-out"),
            name: "run".into(),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

/// One fully resolved point of a (possibly trivial) sweep.
#[derive(Debug, Clone)]
pub struct Point {
    pub index: usize,
    pub sweep: Option<(SweepParam, SweepValue)>,
    /// Config of this point alone: sweep removed, swept value and seed substituted.
    pub config: RunConfig,
    pub params: ModelParams,
    pub grid: TimeGrid,
}

impl Point {
    pub fn mc(&self) -> McConfig {
        self.config.mc.mc()
    }

    pub fn polaron_run(&self) -> Result<PolaronRun, CliError> {
        let mut run = PolaronRun::new(self.params.clone(), self.grid, self.mc())?;
        run.r_min = self.config.mc.r_min;
        run.validate()?;
        Ok(run)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check_version()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn check_version(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(())
    }

    pub fn grid(&self, params: &ModelParams) -> Result<TimeGrid, CliError> {
        let two_sided = params.model == Model::Nelson;
        let grid = match self.grid.n_half {
            Some(n) if two_sided => TimeGrid::two_sided(params.t, n)?,
            Some(n) => TimeGrid::one_sided(params.t, n)?,
            None => TimeGrid::with_step(params.t, self.grid.dt, two_sided)?,
        };
        Ok(grid)
    }

    fn check_sweep(&self) -> Result<(), CliError> {
        let Some(sweep) = &self.sweep else {
            return Ok(());
        };
        if sweep.values.is_empty() {
            return Err(CliError::config("sweep.values is empty"));
        }
        for v in &sweep.values {
            let ok = match (sweep.param, v) {
                (SweepParam::P, SweepValue::Vector(p)) => p.iter().all(|x| x.is_finite()),
                (SweepParam::P, SweepValue::Scalar(_)) => false,
                (_, SweepValue::Vector(_)) => false,
                (SweepParam::Eps | SweepParam::Lambda, SweepValue::Scalar(x)) => {
                    x.is_finite() && *x >= 0.0
                }
                (SweepParam::Dt | SweepParam::T, SweepValue::Scalar(x)) => {
                    x.is_finite() && *x > 0.0
                }
                (SweepParam::G, SweepValue::Scalar(x)) => x.is_finite(),
            };
            if !ok {
                return Err(CliError::config(format!(
                    "invalid sweep value {v} for parameter {}",
                    sweep.param
                )));
            }
        }
        Ok(())
    }

    /// Expand the sweep into resolved points (a single point without a sweep).
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        self.check_version()?;
        self.check_sweep()?;
        let base = RunConfig {
            sweep: None,
            ..self.clone()
        };
        let entries: Vec<Option<(SweepParam, SweepValue)>> = match &self.sweep {
            None => vec![None],
            Some(s) => s
                .values
                .iter()
                .map(|v| Some((s.param, v.clone())))
                .collect(),
        };
        let crn = self.sweep.as_ref().is_none_or(|s| s.common_random_numbers);
        entries
            .into_iter()
            .enumerate()
            .map(|(index, entry)| {
                let mut cfg = base.clone();
                if !crn {
                    cfg.mc.master_seed = cfg.mc.master_seed.wrapping_add(index as u64);
                }
                if let Some((param, value)) = &entry {
                    apply(&mut cfg, *param, value);
                }
                let params = cfg.model.params();
                let grid = cfg.grid(&params)?;
                Ok(Point {
                    index,
                    sweep: entry,
                    config: cfg,
                    params,
                    grid,
                })
            })
            .collect()
    }
}

fn apply(cfg: &mut RunConfig, param: SweepParam, value: &SweepValue) {
    match (param, value) {
        (SweepParam::P, SweepValue::Vector(p)) => cfg.model.p = Some(p.clone()),
        (SweepParam::Eps, SweepValue::Scalar(x)) => cfg.model.eps = *x,
        (SweepParam::Lambda, SweepValue::Scalar(x)) => cfg.model.lambda = *x,
        (SweepParam::G, SweepValue::Scalar(x)) => cfg.model.g = *x,
        (SweepParam::T, SweepValue::Scalar(x)) => cfg.model.t = *x,
        (SweepParam::Dt, SweepValue::Scalar(x)) => {
            cfg.grid.dt = *x;
            cfg.grid.n_half = None;
        }
        _ => unreachable!("sweep values are checked before expansion"),
    }
}

/// Parse `eps=0.5,0.25` or `p=1:0:0,2:0:0`.
pub fn parse_sweep(spec: &str) -> Result<SweepSection, CliError> {
    let (name, list) = spec.split_once('=').ok_or_else(|| {
        CliError::config(format!("sweep `{spec}` is not of the form name=v1,v2,..."))
    })?;
    let param: SweepParam = serde_json::from_value(serde_json::Value::String(
        name.trim().to_string(),
    ))
    .map_err(|_| {
        CliError::config(format!(
            "unknown sweep parameter `{name}` (eps, lambda, dt, t, p, g)"
        ))
    })?;
    let values = list
        .split(',')
        .map(|item| {
            if param == SweepParam::P {
                parse_vector(item, ':').map(SweepValue::Vector)
            } else {
                parse_f64(item).map(SweepValue::Scalar)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepSection {
        param,
        values,
        common_random_numbers: true,
    })
}

pub fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::config(format!("`{s}` is not a number")))
}

pub fn parse_vector(s: &str, sep: char) -> Result<Vec<f64>, CliError> {
    s.split(sep).map(parse_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err =
            RunConfig::from_toml_str("schema_version = 1\n[model]\nepsilon = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("epsilon"), "{err}");
        assert!(RunConfig::from_toml_str("schema_version = 2\n").is_err());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn sweep_expansion_substitutes_values_and_seeds() {
        let mut cfg = RunConfig {
            sweep: Some(parse_sweep("dt=0.25,0.125").unwrap()),
            ..RunConfig::default()
        };
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].grid.n_half, 8);
        assert_eq!(pts[1].config.mc.master_seed, cfg.mc.master_seed);
        cfg.sweep.as_mut().unwrap().common_random_numbers = false;
        assert_eq!(
            cfg.points().unwrap()[1].config.mc.master_seed,
            cfg.mc.master_seed + 1
        );

        let s = parse_sweep("p=1:0:0,0:2:0").unwrap();
        assert_eq!(s.values[1], SweepValue::Vector(vec![0.0, 2.0, 0.0]));
        assert!(parse_sweep("mass=1").is_err());
        cfg.sweep = Some(parse_sweep("t=-1").unwrap());
        assert!(cfg.points().is_err());
    }
}
