use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn pimc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pimc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Values of the `value` column from `r,t,value` output.
fn kernel_values(o: &Output) -> Vec<f64> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

fn read_csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kernels_command_reproduces_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = pimc(
        &[
            "kernels", "--kernel", "rho", "--d", "2", "--eps", "0", "--lambda", "1", "--at", "0,0",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v = kernel_values(&o)[0];
    assert!((v - PI * 3f64.ln()).abs() < 1e-8, "{v}");

    let o = pimc(
        &[
            "kernels", "--kernel", "polaron", "--lambda", "0", "--eps", "0", "--at", "2,0",
        ],
        dir.path(),
    );
    assert!((kernel_values(&o)[0] - PI * PI / 2.0).abs() < 1e-12);

    let o = pimc(&["kernels", "--check"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("PASS").count(), 7);

    let csv_path = dir.path().join("grid.csv");
    let o = pimc(
        &[
            "kernels",
            "--kernel",
            "w",
            "--eps",
            "0.5",
            "--r",
            "0,0.5,1",
            "--t",
            "0,1",
            "--out",
            csv_path.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&csv_path).len(), 6);
}

#[test]
fn kernel_table_is_written_with_its_error_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\n[model]\neps = 0.5\nt = 0.25\n[grid]\ndt = 0.0625\n[kernels]\nn_r = 96\nn_tau = 32\nmax_table_error = 1e-2\nvalidation_probes = 200\n",
    )
    .unwrap();
    let table = dir.path().join("w.json");
    let o = pimc(
        &[
            "kernels",
            "--config",
            cfg.to_str().unwrap(),
            "--kernel",
            "w",
            "--table",
            table.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let t = json(&table);
    assert_eq!(t["kernel_id"], "w");
    assert!(t["interp_error_bound"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\n[mc]\nnpaths = 10\n").unwrap();
    let o = pimc(&["estimate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("npaths"), "{}", stderr(&o));

    std::fs::write(&bad, "schema_version = 7\n").unwrap();
    assert_eq!(
        pimc(&["estimate", "--config", bad.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pimc(&["estimate", "--sweep", "mass=1,2"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pimc(&["kernels", "--at", "1"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        pimc(&["gamma", "--p", "1,0,0", "--n-paths", "4"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn estimator_failures_exit_with_code_four_and_keep_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = pimc(
        &[
            "estimate",
            "--g",
            "3",
            "--mode",
            "direct",
            "--n-paths",
            "20",
            "--dt",
            "0.125",
            "--log-weight-cap",
            "0.1",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    let s = json(&dir.path().join("pimc-out/run.json"));
    assert_eq!(s["status"], "error");
    assert_eq!(s["error_class"], "estimator");
    assert_eq!(s["weight_cap_hits"], 20);
    assert!(s["error"].as_str().unwrap().contains("cap"));
}

#[test]
fn free_vacuum_matches_the_gaussian_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = pimc(
        &[
            "estimate",
            "--g",
            "0",
            "--p",
            "1,0,0",
            "--d",
            "3",
            "--t",
            "1",
            "--n-paths",
            "100000",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("pimc-out/run.json"));
    let (m, se) = (
        s["mean_re"].as_f64().unwrap(),
        s["std_error_re"].as_f64().unwrap(),
    );
    assert!((m - (-1f64).exp()).abs() < 3.0 * se, "{m} +- {se}");
    assert_eq!(s["config"]["model"]["p"][0].as_f64(), Some(1.0));
}

#[test]
fn summaries_rerun_exactly_in_serial_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "estimate",
        "--g",
        "0.5",
        "--eps",
        "0.5",
        "--t",
        "0.5",
        "--dt",
        "0.0625",
        "--n-paths",
        "300",
        "--sweep",
        "eps=0.5,0.25",
        "--workers",
        "1",
    ];
    assert!(pimc(&args, dir.path()).status.success());
    let first = dir.path().join("pimc-out/run-001.json");
    let line = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        let i = text.find("\"mean_re\"").unwrap();
        let j = i + text[i..].find(",\"params_fingerprint\"").unwrap();
        text[i..j].to_string()
    };
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("re{workers}"));
        let o = pimc(
            &[
                "estimate",
                "--from-summary",
                first.to_str().unwrap(),
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(line(&first), line(&out.join("run.json")));
    }
    let rows = read_csv(&dir.path().join("pimc-out/run.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["diff_re"].is_empty());
    assert!(!rows[1]["diff_re"].is_empty());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"schema_version = 1
[model]
model = "polaron"
g = 0.6
lambda = 0.5
eps = 0.0
t = 0.5

[grid]
dt = 0.0625

[mc]
n_paths = 200
master_seed = 9

[estimator]
kind = "diamagnetic"
momenta = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.5, 0.0], [2.0, 2.0, 0.0], [0.5, 0.5, 0.5]]

[sweep]
param = "g"
values = [0.3, 0.6]

[output]
dir = "dia"
name = "polaron"
"#,
    )
    .unwrap();
    let o = pimc(
        &[
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("dia/polaron-diamagnetic.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows
        .iter()
        .all(|r| r["ok"] == "true" && r["energy_ok"] == "true"));
    let s = json(&dir.path().join("dia/polaron-001.json"));
    assert_eq!(s["master_seed"], 11);
    assert_eq!(s["mode"], "unregularized");
}

#[test]
fn overlap_rows_carry_the_analytic_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = pimc(
        &[
            "gamma",
            "--d",
            "2",
            "--g",
            "1",
            "--lambda",
            "1",
            "--eps",
            "0",
            "--dt",
            "0.0625",
            "--n-paths",
            "300",
            "--sweep",
            "t=0.5,1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("pimc-out/run.csv"));
    for r in &rows {
        let bound: f64 = r["bound"].parse().unwrap();
        assert!((bound - (-2.0 * PI).exp()).abs() < 1e-12);
        assert_eq!(r["bound_satisfied"], "true");
    }
    let o = pimc(
        &[
            "gamma",
            "--g",
            "0",
            "--n-paths",
            "10",
            "--sweep",
            "t=0.5,1",
            "--out",
            "free",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    for r in read_csv(&dir.path().join("free/run.csv")) {
        assert_eq!(r["gamma"], "1.0");
    }
}

#[test]
fn polaron_kato_run_reports_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = pimc(
        &[
            "estimate",
            "--model",
            "polaron",
            "--g",
            "0",
            "--lambda",
            "0",
            "--eps",
            "0",
            "--t",
            "0.5",
            "--kind",
            "kato",
            "--n-paths",
            "10",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("pimc-out/run-kato.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r["mean_re"] == "1.0" && r["stable"] == "true"));
}
