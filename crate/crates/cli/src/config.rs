//! Experiment configs: JSON on disk, `--set key=value` overrides, validation.

use std::path::Path;

use dnls_core::dynamics::Integrator;
use dnls_core::{Branch, NonlinearityModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Extra half width required beyond the light cone `2T`.
pub const WINDOW_MARGIN: f64 = 50.0;
pub const MAX_DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SolitaryScan,
    SpCertify,
    ResolventCheck,
    LinearDecay,
    Stability,
    Scattering,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SolitaryScan => "solitary_scan",
            ExperimentKind::SpCertify => "sp_certify",
            ExperimentKind::ResolventCheck => "resolvent_check",
            ExperimentKind::LinearDecay => "linear_decay",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Scattering => "scattering",
        }
    }
}

fn default_omega0() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_beta() -> f64 {
    2.0
}
fn default_n() -> usize {
    200
}
fn default_record_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: NonlinearityModel,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default)]
    pub theta0: f64,
    /// Size of the initial perturbation, `‖χ₀‖_{l²} + ‖χ₀‖_{l¹_β}`.
    #[serde(default)]
    pub d: f64,
    /// Final time; for `linear_decay` the last time of the grid.
    #[serde(rename = "T", default)]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(rename = "N", default = "default_n")]
    pub half_width: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,

    /// Selects the wave by amplitude instead of by `omega0`.
    #[serde(rename = "C", default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub branch: Option<Branch>,
    /// `[min, max, step]` of the `solitary_scan` frequencies.
    #[serde(default)]
    pub omega_range: Option<[f64; 3]>,
    /// Grid spacing of the `sp_certify` scan.
    #[serde(default)]
    pub grid_step: Option<f64>,
    /// Spectral samples `[re, im]` for `resolvent_check`.
    #[serde(default)]
    pub lambdas: Option<Vec<[f64; 2]>>,
    /// First time and spacing of the `linear_decay` grid.
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub t_step: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub integrator: Integrator,
}

impl ExperimentConfig {
    /// Reads a config, applies `key=value` overrides, parses and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let errs = crate::schema::validate_str(&value, crate::schema::CONFIG_SCHEMA);
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        cfg.model = NonlinearityModel::new(cfg.model.coeffs.clone())?;
        Ok(cfg)
    }

    pub fn output_dir_or_default(&self) -> String {
        self.output_dir
            .clone()
            .unwrap_or_else(|| format!("runs/{}", self.experiment.name()))
    }

    /// Checks every rule and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut finite = |name: &str, v: f64| {
            if !v.is_finite() {
                errs.push(format!("field `{name}`: must be finite, got {v}"));
            }
        };
        finite("omega0", self.omega0);
        finite("theta0", self.theta0);
        finite("d", self.d);
        finite("T", self.t_end);
        finite("dt", self.dt);
        finite("beta", self.beta);
        if NonlinearityModel::new(self.model.coeffs.clone()).is_err() {
            errs.push("field `model.coeffs`: coefficients must be finite".into());
        }
        if self.t_end < 0.0 {
            errs.push(format!("field `T`: must be >= 0, got {}", self.t_end));
        }
        let needed = 2.0 * self.t_end + WINDOW_MARGIN;
        if (self.half_width as f64) < needed {
            errs.push(format!(
                "field `N`: window guard N >= 2T + {WINDOW_MARGIN} violated (N = {}, T = {}, need N >= {needed})",
                self.half_width, self.t_end
            ));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            errs.push(format!(
                "field `dt`: must satisfy 0 < dt <= {MAX_DT}, got {}",
                self.dt
            ));
        }
        if self.beta < 0.0 {
            errs.push(format!("field `beta`: must be >= 0, got {}", self.beta));
        }
        if self.d < 0.0 {
            errs.push(format!("field `d`: must be >= 0, got {}", self.d));
        }
        if self.record_every == 0 {
            errs.push("field `record_every`: must be at least 1".into());
        }
        if let Some(c) = self.amplitude {
            if !(c > 0.0 && c.is_finite()) {
                errs.push(format!("field `C`: must be positive, got {c}"));
            }
        }
        if let Some([lo, hi, step]) = self.omega_range {
            if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
                errs.push(format!(
                    "field `omega_range`: need min <= max and step > 0, got [{lo}, {hi}, {step}]"
                ));
            }
        }
        if let Some(h) = self.grid_step {
            if !(h > 0.0) {
                errs.push(format!("field `grid_step`: must be positive, got {h}"));
            }
        }
        match self.experiment {
            ExperimentKind::Stability | ExperimentKind::Scattering => {
                if !(self.t_end > 0.0) {
                    errs.push("field `T`: must be positive for time-dependent experiments".into());
                } else {
                    let steps = self.t_end / self.dt;
                    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                        errs.push(format!("field `T`: must be a multiple of dt = {}", self.dt));
                    }
                }
            }
            ExperimentKind::LinearDecay => {
                let t_min = self.t_min.unwrap_or(10.0);
                let t_step = self.t_step.unwrap_or(5.0);
                if !(t_min > 0.0 && t_step > 0.0 && self.t_end > t_min) {
                    errs.push(format!(
                        "fields `t_min`, `t_step`, `T`: need 0 < t_min < T and t_step > 0 (t_min = {t_min}, t_step = {t_step}, T = {})",
                        self.t_end
                    ));
                }
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }
}

/// Sets `key=value` in a JSON object. Dotted keys descend into objects; the
/// value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override `{key}`: `{part}` is not inside an object"
            ))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Config(format!(
        "override `{assignment}` has an empty key"
    )))
}
