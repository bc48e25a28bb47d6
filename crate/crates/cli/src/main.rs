use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnls_cli::compare::{compare, ToleranceManifest};
use dnls_cli::config::ExperimentConfig;
use dnls_cli::error::{CliError, Result};
use dnls_cli::{read_json, run_to_dir, THREADS_VAR};

/// Runs lattice Schrödinger experiments and compares their reports.
#[derive(Parser)]
#[command(name = "dnls-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a config field, e.g. `--set d=0.02` or `--set model.coeffs=[2,-1]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Overwrite an existing run in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Compare a report with a baseline; exits 1 if a field is out of tolerance.
    Compare {
        report: PathBuf,
        baseline: PathBuf,
        /// Tolerance manifest replacing the built-in one.
        #[arg(long)]
        tolerances: Option<PathBuf>,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| {
            CliError::Config(format!("{THREADS_VAR} = {v:?} is not a thread count"))
        })?;
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            out,
            set,
            force,
        } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(cfg.output_dir_or_default()));
            run_to_dir(&cfg, &dir, force)?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Compare {
            report,
            baseline,
            tolerances,
        } => {
            let tol = match tolerances {
                Some(p) => serde_json::from_value(read_json(&p)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => ToleranceManifest::builtin(),
            };
            let diff = compare(&read_json(&report)?, &read_json(&baseline)?, &tol)?;
            println!("{}", serde_json::to_string_pretty(&diff)?);
            if diff.diffs.is_empty() {
                Ok(())
            } else {
                Err(CliError::Exceeded {
                    count: diff.diffs.len(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
