//! Estimate and overlap drivers over the points of a sweep.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use pimc_core::estimate::{paired_difference, MCEstimate};
use pimc_core::estimators::{
    coherent_expectation, diamagnetic_check, energy_over_horizon, gamma_overlap,
    vacuum_expectation, DiamagneticReport, VacuumMode,
};
use pimc_core::kernels;
use pimc_core::polaron::{
    kato_moment_stress, polaron_diamagnetic, polaron_vacuum, KatoReport, PolaronMode,
};
use pimc_core::Model;

use crate::config::{join_vector, EstimatorKind, Format, Point, RunConfig};
use crate::error::CliError;
use crate::output::{
    output_path, write_csv, write_json, Command, DiamagneticRow, EstimateRow, GammaBound, GammaRow,
    KatoRow, Status, Summary,
};

/// Everything an estimator produced at one point.
#[derive(Debug, Default)]
struct Outcome {
    mode: String,
    estimate: Option<MCEstimate>,
    /// Real parts of the per-path samples, for paired differences.
    samples: Option<Vec<f64>>,
    collision_events: Option<u64>,
    max_log_weight: Option<f64>,
    table_error: Option<f64>,
    energy: Option<(f64, f64)>,
    diamagnetic: Option<DiamagneticReport>,
    kato: Option<KatoReport>,
    gamma: Option<GammaBound>,
}

fn real_parts(samples: &[Complex64]) -> Vec<f64> {
    samples.iter().map(|z| z.re).collect()
}

fn nelson_mode_name(mode: VacuumMode) -> String {
    match mode {
        VacuumMode::Direct => "direct".into(),
        VacuumMode::Renormalized { .. } => "renormalized".into(),
    }
}

fn polaron_mode_name(mode: PolaronMode) -> String {
    match mode {
        PolaronMode::Regularized => "regularized".into(),
        PolaronMode::Unregularized => "unregularized".into(),
        PolaronMode::IrLimit => "ir_limit".into(),
    }
}

fn kind_name(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Vacuum => "vacuum",
        EstimatorKind::Energy => "energy",
        EstimatorKind::Diamagnetic => "diamagnetic",
        EstimatorKind::Coherent => "coherent",
        EstimatorKind::Kato => "kato",
    }
}

fn momenta(point: &Point) -> Result<Vec<Vec<f64>>, CliError> {
    let m = &point.config.estimator.momenta;
    if m.is_empty() {
        return Err(CliError::config(
            "a diamagnetic run needs estimator.momenta",
        ));
    }
    Ok(m.clone())
}

fn estimate_nelson(point: &Point) -> Result<Outcome, CliError> {
    let cfg = &point.config;
    let settings = &cfg.kernels;
    let mc = point.mc();
    let (params, grid) = (&point.params, &point.grid);
    let est = &cfg.estimator;
    match est.kind {
        EstimatorKind::Vacuum | EstimatorKind::Energy => {
            let mode = est.nelson_mode()?;
            let run = vacuum_expectation(params, mode, grid, &mc, settings)?;
            let energy = if est.kind == EstimatorKind::Energy {
                let e = energy_over_horizon(&run.estimate, grid.span())?;
                Some((e.energy, e.std_error))
            } else {
                None
            };
            Ok(Outcome {
                mode: nelson_mode_name(mode),
                samples: Some(real_parts(&run.samples)),
                estimate: Some(run.estimate),
                max_log_weight: Some(run.max_log_weight),
                table_error: run.table_error,
                energy,
                ..Outcome::default()
            })
        }
        EstimatorKind::Diamagnetic => {
            let mode = est.nelson_mode()?;
            let list: Vec<_> = momenta(point)?.iter().map(|p| params.with_p(p)).collect();
            let report = diamagnetic_check(&list, mode, grid, &mc, settings)?;
            Ok(Outcome {
                mode: nelson_mode_name(mode),
                diamagnetic: Some(report),
                ..Outcome::default()
            })
        }
        EstimatorKind::Coherent => {
            let c = &cfg.coherent;
            let alpha = Complex64::new(c.alpha[0], c.alpha[1]);
            let beta = Complex64::new(c.beta[0], c.beta[1]);
            let estimate =
                coherent_expectation(params, alpha, beta, &c.rho1, &c.rho2, grid, &mc, settings)?;
            Ok(Outcome {
                mode: "renormalized".into(),
                estimate: Some(estimate),
                ..Outcome::default()
            })
        }
        EstimatorKind::Kato => Err(CliError::config(
            "the kato stress test is a polaron estimator",
        )),
    }
}

fn estimate_polaron(point: &Point) -> Result<Outcome, CliError> {
    let cfg = &point.config;
    let settings = &cfg.kernels;
    let est = &cfg.estimator;
    let run = point.polaron_run()?;
    match est.kind {
        EstimatorKind::Vacuum | EstimatorKind::Energy => {
            let mode = est.polaron_mode(&point.params)?;
            let v = polaron_vacuum(&run, mode, settings)?;
            let energy = if est.kind == EstimatorKind::Energy {
                let e = energy_over_horizon(&v.estimate, point.grid.span())?;
                Some((e.energy, e.std_error))
            } else {
                None
            };
            Ok(Outcome {
                mode: polaron_mode_name(mode),
                samples: Some(real_parts(&v.samples)),
                estimate: Some(v.estimate),
                collision_events: Some(v.collision_events),
                max_log_weight: Some(v.max_log_weight),
                table_error: v.table_error,
                energy,
                ..Outcome::default()
            })
        }
        EstimatorKind::Diamagnetic => {
            let mode = est.polaron_mode(&point.params)?;
            let report = polaron_diamagnetic(&run, mode, &momenta(point)?, settings)?;
            Ok(Outcome {
                mode: polaron_mode_name(mode),
                diamagnetic: Some(report),
                ..Outcome::default()
            })
        }
        EstimatorKind::Kato => {
            let report = kato_moment_stress(&run, &est.kato_dts, est.kato_threshold, settings)?;
            let finest = report.levels.last().expect("at least two levels");
            Ok(Outcome {
                mode: polaron_mode_name(PolaronMode::IrLimit),
                estimate: Some(finest.estimate.clone()),
                collision_events: Some(report.levels.iter().map(|l| l.collision_events).sum()),
                max_log_weight: Some(
                    report
                        .levels
                        .iter()
                        .map(|l| l.max_log_weight)
                        .fold(f64::NEG_INFINITY, f64::max),
                ),
                kato: Some(report),
                ..Outcome::default()
            })
        }
        EstimatorKind::Coherent => Err(CliError::config(
            "the coherent estimator is defined for the Nelson model",
        )),
    }
}

fn gamma_point(point: &Point) -> Result<Outcome, CliError> {
    if point.params.model != Model::Nelson {
        return Err(CliError::config("gamma is defined for the Nelson model"));
    }
    if !point.params.is_p_zero() {
        return Err(CliError::config("gamma needs P = 0"));
    }
    let settings = &point.config.kernels;
    let g = gamma_overlap(&point.params, &point.grid, &point.mc(), settings)?;
    let bound = kernels::overlap_lower_bound(&point.params, &settings.quad)?;
    let e = &g.estimate;
    Ok(Outcome {
        mode: "direct".into(),
        gamma: Some(GammaBound {
            bound,
            bound_satisfied: e.mean.re + 3.0 * e.std_error >= bound,
        }),
        estimate: Some(g.estimate),
        max_log_weight: Some(g.max_log_weight),
        ..Outcome::default()
    })
}

/// Result of one command over all sweep points.
#[derive(Debug)]
pub struct RunReport {
    pub summaries: Vec<Summary>,
    pub files: Vec<PathBuf>,
    /// First point failure, which decides the exit code.
    pub first_error: Option<CliError>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.first_error.as_ref().map_or(0, CliError::exit_code)
    }
}

fn summarize(
    command: Command,
    point: &Point,
    outcome: Result<Outcome, CliError>,
    wall: f64,
) -> (Summary, Option<Vec<f64>>) {
    let cfg = &point.config;
    let (out, err) = match outcome {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e)),
    };
    let est = out.estimate.as_ref();
    let mean_re = est
        .map(|e| e.mean.re)
        .or(out.diamagnetic.as_ref().map(|r| r.reference));
    let summary = Summary {
        schema_version: cfg.schema_version,
        command,
        model: point.params.model,
        kind: match command {
            Command::Gamma => "gamma".into(),
            Command::Estimate => kind_name(cfg.estimator.kind).into(),
        },
        mode: out.mode,
        sweep_index: point.index,
        sweep_param: point.sweep.as_ref().map(|s| s.0),
        sweep_value: point.sweep.as_ref().map(|s| s.1.clone()),
        params: point.params.clone(),
        grid: point.grid,
        n_paths: cfg.mc.n_paths,
        master_seed: cfg.mc.master_seed,
        status: if err.is_some() {
            Status::Error
        } else {
            Status::Ok
        },
        error_class: err.as_ref().map(|e| e.class),
        error: err.as_ref().map(|e| e.message.clone()),
        mean_re,
        mean_im: est.map(|e| e.mean.im),
        std_error: est.map(|e| e.std_error),
        std_error_re: est.map(|e| e.std_error_re),
        std_error_im: est.map(|e| e.std_error_im),
        params_fingerprint: est.map(|e| e.params_fingerprint.clone()),
        wall_time_s: wall,
        collision_events: out.collision_events,
        weight_cap_hits: err.as_ref().map_or(0, |e| e.weight_cap_hits),
        max_log_weight: out.max_log_weight,
        table_error: out.table_error,
        energy: out.energy.map(|e| e.0),
        energy_std_error: out.energy.map(|e| e.1),
        diff_prev_re: None,
        diff_prev_std_error: None,
        gamma: out.gamma,
        diamagnetic: out.diamagnetic,
        kato: out.kato,
        config: cfg.clone(),
    };
    (summary, out.samples)
}

/// Run `command` at every point of `cfg`'s sweep. Configuration errors abort;
/// estimator failures are recorded per point and reported in `first_error`.
pub fn execute(command: Command, cfg: &RunConfig, write: bool) -> Result<RunReport, CliError> {
    let points = cfg.points()?;
    let crn = cfg.sweep.as_ref().is_none_or(|s| s.common_random_numbers);
    let mut summaries = Vec::with_capacity(points.len());
    let mut first_error = None;
    let mut prev: Option<Vec<f64>> = None;
    for point in &points {
        let start = Instant::now();
        let outcome = match (command, point.params.model) {
            (Command::Gamma, _) => gamma_point(point),
            (Command::Estimate, Model::Nelson) => estimate_nelson(point),
            (Command::Estimate, Model::Polaron) => estimate_polaron(point),
        };
        if let Err(e) = &outcome {
            first_error.get_or_insert_with(|| e.clone());
        }
        let (mut summary, samples) =
            summarize(command, point, outcome, start.elapsed().as_secs_f64());
        if let (true, Some(a), Some(b)) = (crn, prev.as_ref(), samples.as_ref()) {
            if let Ok((d, se)) = paired_difference(b, a) {
                summary.diff_prev_re = Some(d);
                summary.diff_prev_std_error = Some(se);
            }
        }
        print_line(&summary);
        prev = samples;
        summaries.push(summary);
    }
    let files = if write {
        write_outputs(command, cfg, &summaries)?
    } else {
        Vec::new()
    };
    Ok(RunReport {
        summaries,
        files,
        first_error,
    })
}

fn print_line(s: &Summary) {
    let label = match (&s.sweep_param, &s.sweep_value) {
        (Some(p), Some(v)) => format!("[{}] {p}={v}", s.sweep_index),
        _ => format!("[{}]", s.sweep_index),
    };
    match (&s.status, s.mean_re) {
        (Status::Ok, Some(m)) => match s.std_error {
            Some(se) => println!(
                "{label} {} {}: mean {m:.10} + {:.10}i, std_error {se:.3e}",
                s.kind,
                s.mode,
                s.mean_im.unwrap_or(0.0)
            ),
            None => println!("{label} {} {}: reference {m:.10}", s.kind, s.mode),
        },
        _ => println!(
            "{label} {}: error: {}",
            s.kind,
            s.error.as_deref().unwrap_or("")
        ),
    }
}

fn sweep_cells(s: &Summary) -> (String, String) {
    (
        s.sweep_param.map(|p| p.to_string()).unwrap_or_default(),
        s.sweep_value
            .as_ref()
            .map(|v| v.to_string())
            .unwrap_or_default(),
    )
}

fn write_outputs(
    command: Command,
    cfg: &RunConfig,
    summaries: &[Summary],
) -> Result<Vec<PathBuf>, CliError> {
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir)
        .map_err(|e| CliError::io(&format!("cannot create {}", out.dir.display()), e))?;
    let mut files = Vec::new();
    if out.formats.contains(&Format::Json) {
        for s in summaries {
            let suffix = if cfg.sweep.is_some() {
                format!("-{:03}.json", s.sweep_index)
            } else {
                ".json".to_string()
            };
            let path = output_path(&out.dir, &out.name, &suffix);
            write_json(&path, s)?;
            files.push(path);
        }
    }
    if out.formats.contains(&Format::Csv) {
        let path = output_path(&out.dir, &out.name, ".csv");
        match command {
            Command::Estimate => write_csv(&path, &estimate_rows(summaries))?,
            Command::Gamma => write_csv(&path, &gamma_rows(summaries))?,
        }
        files.push(path);
        let dia: Vec<DiamagneticRow> = summaries.iter().flat_map(diamagnetic_rows).collect();
        if !dia.is_empty() {
            let path = output_path(&out.dir, &out.name, "-diamagnetic.csv");
            write_csv(&path, &dia)?;
            files.push(path);
        }
        let kato: Vec<KatoRow> = summaries.iter().flat_map(kato_rows).collect();
        if !kato.is_empty() {
            let path = output_path(&out.dir, &out.name, "-kato.csv");
            write_csv(&path, &kato)?;
            files.push(path);
        }
    }
    Ok(files)
}

pub fn estimate_rows(summaries: &[Summary]) -> Vec<EstimateRow> {
    summaries
        .iter()
        .map(|s| {
            let (param, value) = sweep_cells(s);
            EstimateRow {
                index: s.sweep_index,
                param,
                value,
                kind: s.kind.clone(),
                mode: s.mode.clone(),
                model: s.model,
                d: s.params.d,
                g: s.params.g,
                lambda: s.params.lambda,
                eps: s.params.eps,
                p: join_vector(&s.params.p),
                t: s.params.t,
                dt: s.grid.dt(),
                n_paths: s.n_paths,
                master_seed: s.master_seed,
                status: s.status,
                mean_re: s.mean_re,
                mean_im: s.mean_im,
                std_error: s.std_error,
                diff_re: s.diff_prev_re,
                diff_std_error: s.diff_prev_std_error,
                energy: s.energy,
                energy_std_error: s.energy_std_error,
                collision_events: s.collision_events,
                max_log_weight: s.max_log_weight,
                table_error: s.table_error,
                error: s.error.clone().unwrap_or_default(),
            }
        })
        .collect()
}

pub fn gamma_rows(summaries: &[Summary]) -> Vec<GammaRow> {
    summaries
        .iter()
        .map(|s| {
            let (param, value) = sweep_cells(s);
            GammaRow {
                index: s.sweep_index,
                param,
                value,
                d: s.params.d,
                g: s.params.g,
                lambda: s.params.lambda,
                eps: s.params.eps,
                t: s.params.t,
                dt: s.grid.dt(),
                n_paths: s.n_paths,
                master_seed: s.master_seed,
                status: s.status,
                gamma: s.mean_re,
                std_error: s.std_error,
                bound: s.gamma.as_ref().map(|g| g.bound),
                bound_satisfied: s.gamma.as_ref().map(|g| g.bound_satisfied),
                max_log_weight: s.max_log_weight,
                error: s.error.clone().unwrap_or_default(),
            }
        })
        .collect()
}

fn diamagnetic_rows(s: &Summary) -> Vec<DiamagneticRow> {
    let Some(r) = &s.diamagnetic else {
        return Vec::new();
    };
    let (param, value) = sweep_cells(s);
    r.entries
        .iter()
        .map(|e| DiamagneticRow {
            index: s.sweep_index,
            param: param.clone(),
            value: value.clone(),
            p: join_vector(&e.p),
            mean_re: e.mean.re,
            mean_im: e.mean.im,
            modulus: e.modulus,
            reference: r.reference,
            ok: e.ok,
            energy: e.energy,
            energy_ok: r.reference_energy <= e.energy,
        })
        .collect()
}

fn kato_rows(s: &Summary) -> Vec<KatoRow> {
    let Some(r) = &s.kato else {
        return Vec::new();
    };
    let (param, value) = sweep_cells(s);
    r.levels
        .iter()
        .map(|l| KatoRow {
            index: s.sweep_index,
            param: param.clone(),
            value: value.clone(),
            dt: l.dt,
            n_steps: l.n_steps,
            mean_re: l.estimate.mean.re,
            std_error: l.estimate.std_error,
            collision_events: l.collision_events,
            max_log_weight: l.max_log_weight,
            relative_drift: r.relative_drift,
            stable: r.stable,
        })
        .collect()
}
