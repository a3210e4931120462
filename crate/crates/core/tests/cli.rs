use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_purity-sieve")).current_dir(dir).arg(&path).args(args).output().unwrap()
}

fn report(dir: &Path, config: &str, args: &[&str]) -> Value {
    let out = run(dir, config, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn fig1_defaults_write_csv_and_summary() {
    let dir = TempDir::new().unwrap();
    let csv_path: PathBuf = dir.path().join("fig1.csv");
    let out = run(dir.path(), r#"{"experiment": "fig1"}"#, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,purity_0z,purity_0x,pmax_0z,pmax_0x");
    assert_eq!(lines.len(), 401);
    assert_eq!(lines[1], "0,1,1,1,1");
    for line in &lines[1..] {
        assert!(!line.ends_with(','));
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 5);
        if cols[0] <= 1.0 && cols[0] > 0.0 {
            assert!(cols[2] >= cols[1]);
        }
    }
    assert_eq!(lines.last().unwrap().split(',').next().unwrap(), "40");

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig1.summary.json")).unwrap()).unwrap();
    let a = f(&summary["fit_0z"]["quadratic"]);
    assert!((a - 0.12).abs() < 0.05 * 0.12, "{a}");
    assert!(f(&summary["fit_0x"]["quadratic"]).abs() < 1e-5);
}

#[test]
fn fig1_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let args = ["--set", "time.samples=50", "--set", "model.n=4", "--out", "a.csv"];
    assert!(run(dir.path(), r#"{"experiment": "fig1"}"#, &args).status.success());
    let args = ["--set", "time.samples=50", "--set", "model.n=4", "--out", "b.csv"];
    assert!(run(dir.path(), r#"{"experiment": "fig1"}"#, &args).status.success());
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.summary.json"), read("b.summary.json"));
}

#[test]
fn short_time_reports() {
    let dir = TempDir::new().unwrap();
    let z = report(dir.path(), r#"{"experiment": "short-time", "state": "0z"}"#, &[]);
    assert_eq!(z["pass"], true);
    assert!(f(&z["relative_error"]) < 1e-3);
    assert!((f(&z["analytic_coefficient"]) - 0.24).abs() < 1e-12);

    let x = report(dir.path(), r#"{"experiment": "short-time"}"#, &["--set", "state=0x"]);
    assert_eq!(x["pass"], true);
    assert!(f(&x["analytic_coefficient"]).abs() < 1e-15);
    assert!(f(&x["numeric_second_derivative"]).abs() < 1e-6);

    let off = report(dir.path(), r#"{"experiment": "short-time", "model": {"epsilon": 0}}"#, &[]);
    assert_eq!(off["no_decoherence"], true);
    assert_eq!(f(&off["analytic_coefficient"]), 0.0);

    let amps = report(dir.path(), r#"{"experiment": "short-time", "state": [[1, 0], [0, 1]]}"#, &[]);
    assert_eq!(amps["pass"], true);
}

#[test]
fn two_term_model_is_unsupported() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), r#"{"experiment": "short-time", "model": {"epsilon_z": 0.05}}"#, &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn spin_sieve_report() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"experiment": "spin-sieve", "seed": 3}"#;
    let r = report(dir.path(), cfg, &[]);
    assert!((f(&r["objective_0x"]) - PI).abs() < 1e-6);
    assert!((f(&r["objective_0z"]) - TAU).abs() < 1e-6);
    assert!((f(&r["minimizer"]["theta"]) - FRAC_PI_2).abs() < 1e-3);
    assert!((f(&r["t_final"]) - TAU).abs() < 1e-12);
    assert_eq!(r["degenerate"], true);
    assert_eq!(r["restarts"].as_array().unwrap().len(), 8);

    let a = run(dir.path(), cfg, &[]).stdout;
    let b = run(dir.path(), cfg, &[]).stdout;
    assert_eq!(a, b);
}

#[test]
fn qbm_sieve_reports() {
    let dir = TempDir::new().unwrap();
    let r = report(dir.path(), r#"{"experiment": "qbm-sieve"}"#, &[]);
    assert!((f(&r["omega_tilde"]) - SQRT_2).abs() < 1e-15);
    assert!((f(&r["minimizer"]["dx2"]) - 1.0 / (4.0 * SQRT_2)).abs() / (1.0 / (4.0 * SQRT_2)) < 1e-4);
    assert!(f(&r["sweep_max_deviation"]) < 1e-4);
    assert_eq!(r["weight_sweep"].as_array().unwrap().len(), 3);

    let free = report(
        dir.path(),
        r#"{"experiment": "qbm-sieve", "qbm": {"bath_size": 0, "mass": 3, "trap_frequency": 0.5}}"#,
        &[],
    );
    assert_eq!(f(&free["omega_tilde"]), 0.5);
    assert!((f(&free["analytic"]["dx2"]) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn report_written_to_out_path() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), r#"{"experiment": "qbm-sieve"}"#, &["--out", "r.json"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["experiment"], "qbm-sieve");
}

#[test]
fn config_errors_exit_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    for (cfg, args, field) in [
        (r#"{"experiment": "qbm-sieve", "qbm": {"mass": -2}}"#, &[][..], "qbm.mass"),
        (r#"{"experiment": "qbm-sieve"}"#, &["--set", "qbm.trap_frequency=0"][..], "qbm.trap_frequency"),
        (r#"{"experiment": "fig1"}"#, &["--set", "time.samples=1"][..], "time.samples"),
        (r#"{"experiment": "fig1", "modle": {}}"#, &[][..], "modle"),
        (r#"{"experiment": "fig1", "model": {"n": "six"}}"#, &[][..], "model.n"),
        (r#"{"experiment": "fig2"}"#, &[][..], "experiment"),
    ] {
        let out = run(dir.path(), cfg, args);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{cfg}: {err}");
    }
}

#[test]
fn missing_config_file_fails() {
    let out = Command::new(env!("CARGO_BIN_EXE_purity-sieve")).arg("/nonexistent/config.json").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        purity_sieve::cli::ExperimentConfig::from_json(&text, &[])
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 4);
}
