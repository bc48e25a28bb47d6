//! Experiment harness around `dnls-core`: JSON configs, named experiments,
//! artifact directories and regression comparison.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Env var holding the worker thread count.
pub const THREADS_VAR: &str = "DNLS_THREADS";

/// Runs `cfg` and writes `report.json`, the stage CSVs and `manifest.json`
/// into `out_dir`. Returns the report.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path, force: bool) -> Result<Value> {
    if out_dir.join("manifest.json").exists() && !force {
        return Err(CliError::OutputExists(out_dir.to_path_buf()));
    }
    let start = Instant::now();
    let output = experiments::run(cfg)?;
    let errs = schema::validate_str(&output.report, schema::report_schema(cfg.experiment));
    if !errs.is_empty() {
        return Err(CliError::Schema(format!(
            "emitted report is invalid:\n  {}",
            errs.join("\n  ")
        )));
    }
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(path)
    };
    write(
        "report.json",
        &(serde_json::to_string_pretty(&output.report)? + "\n"),
    )?;
    let mut artifacts = vec!["report.json".to_string()];
    for (name, text) in &output.csvs {
        write(name, text)?;
        artifacts.push(name.clone());
    }
    let manifest = json!({
        "config": cfg,
        "versions": {
            "dnls_core": dnls_core::VERSION,
            "dnls_cli": env!("CARGO_PKG_VERSION"),
            "schema_version": experiments::SCHEMA_VERSION,
        },
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "artifacts": artifacts,
    });
    write(
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    Ok(output.report)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}
