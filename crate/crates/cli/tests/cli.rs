use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnls_cli::config::ExperimentKind;
use dnls_cli::schema::{report_schema, validate, validate_str, MANIFEST_SCHEMA};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnls-lab"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_stability() -> Value {
    json!({
        "experiment": "stability",
        "model": {"coeffs": [0.0, 1.0]},
        "omega0": 1.0,
        "d": 0.01,
        "T": 10.0,
        "dt": 0.02,
        "N": 110,
        "seed": 3,
        "record_every": 5
    })
}

#[test]
fn solitary_scan_residuals_are_tiny() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "experiment": "solitary_scan",
        "model": {"coeffs": [0.0, 1.0]},
        "omega_range": [0.2, 3.0, 0.1]
    });
    let path = write_config(tmp.path(), "scan.json", &cfg);
    let out_dir = tmp.path().join("out");
    let out = run(&path, &out_dir, &[]);
    assert_ok(&out);
    let report = read(&out_dir.join("report.json"));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 29);
    for row in rows {
        assert!(row["nep_residual"].as_f64().unwrap() < 1e-10, "{row}");
    }
    let csv = fs::read_to_string(out_dir.join("solitary_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 30);
    assert!(validate_str(&report, report_schema(ExperimentKind::SolitaryScan)).is_empty());
    let manifest = read(&out_dir.join("manifest.json"));
    assert!(validate_str(&manifest, MANIFEST_SCHEMA).is_empty());
    assert_eq!(manifest["versions"]["schema_version"], json!(1));
}

#[test]
fn sp_certify_certifies_the_saturating_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "experiment": "sp_certify",
        "model": {"coeffs": [2.0, -1.0]},
        "C": 1.0,
        "grid_step": 0.1
    });
    let path = write_config(tmp.path(), "sp.json", &cfg);
    let out_dir = tmp.path().join("out");
    assert_ok(&run(&path, &out_dir, &[]));
    let report = read(&out_dir.join("report.json"));
    assert_eq!(report["sp_certified"], json!(true), "{report}");
    assert_eq!(report["zero_count_at_origin"], json!(2));
    assert!(validate_str(&report, report_schema(ExperimentKind::SpCertify)).is_empty());
    assert!(out_dir.join("grid.csv").exists());
}

#[test]
fn window_guard_violation_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_stability();
    cfg["N"] = json!(40);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out_dir = tmp.path().join("out");
    let out = run(&path, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("`N`") && stderr.contains("window guard"),
        "{stderr}"
    );
    assert!(!out_dir.exists());
}

#[test]
fn unknown_fields_and_bad_types_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_stability();
    cfg["omgea0"] = json!(1.0);
    cfg["seed"] = json!("three");
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let out = run(&path, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("omgea0") && stderr.contains("seed"),
        "{stderr}"
    );
}

#[test]
fn stability_runs_are_deterministic_and_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "stab.json", &small_stability());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&run(&path, &a, &[]));
    assert_ok(&run(&path, &b, &[]));
    for name in [
        "majorant.csv",
        "majorant_full.csv",
        "remainder.csv",
        "conservation.csv",
        "report.json",
    ] {
        let (x, y) = (
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
        );
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let report = read(&a.join("report.json"));
    assert!(validate_str(&report, report_schema(ExperimentKind::Stability)).is_empty());
    assert!(report["max_norm_drift"].as_f64().unwrap() < 1e-9);
    let manifest = read(&a.join("manifest.json"));
    assert!(validate_str(&manifest, MANIFEST_SCHEMA).is_empty());
    let header = fs::read_to_string(a.join("majorant.csv")).unwrap();
    assert!(header.starts_with("t,chi_winf,gamma_dot,omega_dot\n"));

    // A different seed gives a different perturbation.
    let c = tmp.path().join("c");
    assert_ok(&run(&path, &c, &["--set", "seed=4"]));
    assert_ne!(
        fs::read(a.join("majorant.csv")).unwrap(),
        fs::read(c.join("majorant.csv")).unwrap()
    );
    assert_eq!(read(&c.join("manifest.json"))["config"]["seed"], json!(4));
}

#[test]
fn existing_run_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "experiment": "solitary_scan",
        "model": {"coeffs": [0.0, 1.0]},
        "omega_range": [0.5, 1.0, 0.5]
    });
    let path = write_config(tmp.path(), "scan.json", &cfg);
    let out_dir = tmp.path().join("out");
    assert_ok(&run(&path, &out_dir, &[]));
    let again = run(&path, &out_dir, &[]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_ok(&run(&path, &out_dir, &["--force"]));
}

#[test]
fn compare_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "experiment": "linear_decay",
        "model": {"coeffs": [0.0, 1.0]},
        "T": 20.0,
        "t_min": 5.0,
        "t_step": 5.0,
        "N": 100
    });
    let path = write_config(tmp.path(), "decay.json", &cfg);
    let out_dir = tmp.path().join("out");
    assert_ok(&run(&path, &out_dir, &[]));
    let report_path = out_dir.join("report.json");
    let report = read(&report_path);
    assert!(validate(
        &report,
        &serde_json::from_str(report_schema(ExperimentKind::LinearDecay)).unwrap()
    )
    .is_empty());

    let compare = |baseline: &Value| {
        let p = write_config(tmp.path(), "baseline.json", baseline);
        bin()
            .arg("compare")
            .arg(&report_path)
            .arg(&p)
            .output()
            .unwrap()
    };

    let same = compare(&report);
    assert_ok(&same);
    let diff: Value = serde_json::from_slice(&same.stdout).unwrap();
    assert_eq!(diff["diffs"], json!([]));

    let mut drifted = report.clone();
    drifted["slope"] = json!(report["slope"].as_f64().unwrap() + 0.06);
    let out = compare(&drifted);
    assert_eq!(out.status.code(), Some(1));
    let diff: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diff["diffs"][0]["path"], json!("$.slope"));

    let mut close = report.clone();
    close["slope"] = json!(report["slope"].as_f64().unwrap() + 0.04);
    assert_ok(&compare(&close));

    let mut missing = report.clone();
    missing.as_object_mut().unwrap().remove("r2");
    assert_eq!(compare(&missing).status.code(), Some(2));
}
