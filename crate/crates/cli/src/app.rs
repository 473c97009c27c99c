//! Argument parsing and command dispatch of the `pimc` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pimc_core::Model;

use crate::config::{
    parse_sweep, parse_vector, EstimatorKind, Format, ModeChoice, ModelSection, RunConfig,
};
use crate::error::CliError;
use crate::kernels_cmd::{self, KernelChoice};
use crate::output::{self, Command, ESTIMATE_CSV_HELP, GAMMA_CSV_HELP};
use crate::run::{execute, RunReport};

const EXIT_CODES: &str = "\
Exit codes: 0 success, 2 configuration error, 3 quadrature failure, 4 estimator failure.";

#[derive(Debug, Parser)]
#[command(
    name = "pimc",
    version,
    about = "Path-integral Monte Carlo for the Nelson and polaron models"
)]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Evaluate kernels, write value grids and tables, run closed-form checks.
    #[command(after_help = EXIT_CODES)]
    Kernels(KernelsArgs),
    /// Monte Carlo estimates (vacuum, energy, diamagnetic, coherent, kato) over an optional sweep.
    #[command(after_long_help = format!("{ESTIMATE_CSV_HELP}\n\n{EXIT_CODES}"))]
    Estimate(RunArgs),
    /// Ground-state overlap estimates with their analytic lower bound.
    #[command(after_long_help = format!("{GAMMA_CSV_HELP}\n\n{EXIT_CODES}"))]
    Gamma(RunArgs),
}

#[derive(Debug, Args)]
pub struct KernelsArgs {
    /// TOML config; its [model] and [kernels] sections supply defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "w")]
    pub kernel: KernelChoice,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Evaluate at `r,t` (repeatable).
    #[arg(long = "at", value_name = "R,T")]
    pub at: Vec<String>,
    /// Radii of a value grid, comma separated.
    #[arg(long, value_name = "R1,R2,...")]
    pub r: Option<String>,
    /// Time gaps of a value grid, comma separated (default 0).
    #[arg(long, value_name = "T1,T2,...")]
    pub t: Option<String>,
    /// Write values as CSV (r, t, value) here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Build a validated table for the configured grid and write it as JSON.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Print closed-form cross-checks.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config file (schema_version = 1); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerun the configuration embedded in a JSON summary.
    #[arg(long, conflicts_with = "config")]
    pub from_summary: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<Model>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Total momentum, comma separated.
    #[arg(long, value_name = "P1,P2,P3", allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Time horizon.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_half: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_weight_cap: Option<f64>,
    /// Polaron near-collision floor.
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<EstimatorKind>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    /// Window of the renormalized action.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Diamagnetic momenta, e.g. `0:0:0,1:0:0,0:2:0`.
    #[arg(long, allow_hyphen_values = true)]
    pub momenta: Option<String>,
    /// Sweep, e.g. `eps=0.5,0.25` or `p=0:0:0,1:0:0` (eps, lambda, dt, t, p, g).
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<String>,
    /// Use master_seed + index at sweep point index instead of common random numbers.
    #[arg(long)]
    pub no_crn: bool,
    /// Evaluate every kernel by direct quadrature instead of tables.
    #[arg(long)]
    pub direct_kernels: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Output formats, comma separated (json, csv).
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    match s {
        "nelson" => Ok(Model::Nelson),
        "polaron" => Ok(Model::Polaron),
        _ => Err(format!("unknown model `{s}` (nelson, polaron)")),
    }
}

fn parse_formats(s: &str) -> Result<Vec<Format>, CliError> {
    s.split(',')
        .map(|f| match f.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::config(format!("unknown output format `{other}`"))),
        })
        .collect()
}

impl RunArgs {
    /// The config file (or defaults) with every flag applied.
    pub fn resolve(&self) -> Result<(Command, RunConfig), CliError> {
        let (mut command, mut cfg) = match (&self.from_summary, &self.config) {
            (Some(path), _) => {
                let head = output::read_summary(path)?;
                (Some(head.command), head.config)
            }
            (None, Some(path)) => (None, RunConfig::load(path)?),
            (None, None) => (None, RunConfig::default()),
        };
        let m = &mut cfg.model;
        if let Some(v) = self.model {
            m.model = v;
        }
        if let Some(v) = self.d {
            m.d = v;
        }
        if let Some(v) = self.g {
            m.g = v;
        }
        if let Some(v) = self.lambda {
            m.lambda = v;
        }
        if let Some(v) = self.eps {
            m.eps = v;
        }
        if let Some(v) = &self.p {
            m.p = Some(parse_vector(v, ',')?);
        }
        if let Some(v) = self.t {
            m.t = v;
        }
        if let Some(v) = self.dt {
            cfg.grid.dt = v;
            cfg.grid.n_half = None;
        }
        if let Some(v) = self.n_half {
            cfg.grid.n_half = Some(v);
        }
        if let Some(v) = self.n_paths {
            cfg.mc.n_paths = v;
        }
        if let Some(v) = self.seed {
            cfg.mc.master_seed = v;
        }
        if let Some(v) = self.log_weight_cap {
            cfg.mc.log_weight_cap = v;
        }
        if let Some(v) = self.r_min {
            cfg.mc.r_min = Some(v);
        }
        if let Some(v) = self.kind {
            cfg.estimator.kind = v;
        }
        if let Some(v) = self.mode {
            cfg.estimator.mode = v;
        }
        if let Some(v) = self.tau {
            cfg.estimator.tau = Some(v);
        }
        if let Some(v) = &self.momenta {
            cfg.estimator.momenta = v
                .split(',')
                .map(|p| parse_vector(p, ':'))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.sweep {
            cfg.sweep = Some(parse_sweep(v)?);
        }
        if self.no_crn {
            match cfg.sweep.as_mut() {
                Some(s) => s.common_random_numbers = false,
                None => return Err(CliError::config("--no-crn needs a sweep")),
            }
        }
        if self.direct_kernels {
            cfg.kernels.use_tables = false;
        }
        if let Some(v) = &self.out {
            cfg.output.dir = v.clone();
        }
        if let Some(v) = &self.name {
            cfg.output.name = v.clone();
        }
        if let Some(v) = &self.format {
            cfg.output.formats = parse_formats(v)?;
        }
        if cfg.model.model == Model::Polaron {
            cfg.model.d = 3;
        }
        Ok((command.take().unwrap_or(Command::Estimate), cfg))
    }
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::config("--workers must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Run `estimate` or `gamma`; the command stored in a summary wins for `--from-summary`.
pub fn run_command(requested: Command, args: &RunArgs) -> Result<RunReport, CliError> {
    let (stored, cfg) = args.resolve()?;
    let command = if args.from_summary.is_some() {
        stored
    } else {
        requested
    };
    with_workers(args.workers, || execute(command, &cfg, true))?
}

fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let v = parse_vector(s, ',')?;
    match v.as_slice() {
        [r, t] => Ok((*r, *t)),
        _ => Err(CliError::config(format!("`{s}` is not of the form r,t"))),
    }
}

pub fn run_kernels(args: &KernelsArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ModelSection {
        d,
        g,
        lambda,
        eps,
        t,
        ..
    } = cfg.model;
    let params = args.kernel.params(
        args.d.unwrap_or(d),
        g,
        args.lambda.unwrap_or(lambda),
        args.eps.unwrap_or(eps),
        t,
    );
    let quad = &cfg.kernels.quad;

    let mut points: Vec<(f64, f64)> = args
        .at
        .iter()
        .map(|s| parse_pair(s))
        .collect::<Result<_, _>>()?;
    if let Some(rs) = &args.r {
        let rs = parse_vector(rs, ',')?;
        let ts = match &args.t {
            Some(ts) => parse_vector(ts, ',')?,
            None => vec![0.0],
        };
        for &t in &ts {
            points.extend(rs.iter().map(|&r| (r, t)));
        }
    } else if args.t.is_some() {
        return Err(CliError::config("--t needs --r"));
    }
    if !points.is_empty() {
        let values = kernels_cmd::evaluate(args.kernel, &params, quad, &points)?;
        match &args.out {
            Some(path) => output::write_csv(path, &values)?,
            None => {
                println!("r,t,value");
                for v in &values {
                    println!("{},{},{:.16e}", v.r, v.t, v.value);
                }
            }
        }
    }
    if let Some(path) = &args.table {
        let table = kernels_cmd::build_table(args.kernel, &params, cfg.grid.dt, &cfg.kernels)?;
        println!(
            "table {} x {}, measured interpolation error {:.3e}",
            table.n_r(),
            table.n_tau(),
            table.interp_error_bound
        );
        output::write_json(path, &table)?;
    }
    if args.check {
        let checks = kernels_cmd::closed_form_checks(params.eps, params.lambda, quad)?;
        let mut failed = 0;
        for c in &checks {
            println!(
                "{} {}: computed {:.16e}, expected {:.16e}, rel error {:.2e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.computed,
                c.expected,
                c.rel_error
            );
            failed += usize::from(!c.pass);
        }
        if failed > 0 {
            return Err(CliError {
                class: crate::error::ErrorClass::Quadrature,
                message: format!("{failed} closed-form check(s) failed"),
                weight_cap_hits: 0,
            });
        }
    }
    if points.is_empty() && args.table.is_none() && !args.check {
        return Err(CliError::config(
            "nothing to do: give --at, --r, --table or --check",
        ));
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Cmd::Kernels(a) => run_kernels(a).map(|_| 0),
        Cmd::Estimate(a) => run_command(Command::Estimate, a).map(|r| report(&r)),
        Cmd::Gamma(a) => run_command(Command::Gamma, a).map(|r| report(&r)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn report(r: &RunReport) -> i32 {
    for f in &r.files {
        println!("wrote {}", f.display());
    }
    if let Some(e) = &r.first_error {
        eprintln!("error: {e}");
    }
    r.exit_code()
}
