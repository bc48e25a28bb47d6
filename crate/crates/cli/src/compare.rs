//! Field-by-field comparison of a report with a baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const DEFAULT_TOLERANCES: &str = include_str!("../schemas/tolerances.json");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    #[serde(default)]
    pub abs: f64,
    #[serde(default)]
    pub rel: f64,
    /// Skip the field entirely.
    #[serde(default)]
    pub ignore: bool,
}

impl Tolerance {
    fn admits(&self, value: f64, baseline: f64) -> bool {
        self.ignore || (value - baseline).abs() <= self.abs + self.rel * baseline.abs()
    }
}

/// Tolerances by field name. A key ending in `*` matches every field with
/// that prefix; exact keys win over prefixes, longer prefixes over shorter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceManifest {
    pub default: Tolerance,
    #[serde(default)]
    pub fields: BTreeMap<String, Tolerance>,
}

impl ToleranceManifest {
    pub fn builtin() -> Self {
        serde_json::from_str(DEFAULT_TOLERANCES).expect("bundled tolerance manifest parses")
    }

    pub fn for_field(&self, name: &str) -> Tolerance {
        if let Some(t) = self.fields.get(name) {
            return *t;
        }
        self.fields
            .iter()
            .filter_map(|(k, t)| k.strip_suffix('*').map(|p| (p, t)))
            .filter(|(p, _)| name.starts_with(p))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, t)| *t)
            .unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub path: String,
    pub report: Value,
    pub baseline: Value,
    pub abs_diff: Option<f64>,
    pub tolerance: Option<Tolerance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub experiment: String,
    pub compared: usize,
    pub diffs: Vec<FieldDiff>,
}

/// Compares two reports. Differing structure (a field present on one side
/// only, arrays of different length, number against non-number) is a schema
/// error; numeric differences beyond tolerance and unequal strings or
/// booleans are listed in the diff.
pub fn compare(report: &Value, baseline: &Value, tol: &ToleranceManifest) -> Result<DiffReport> {
    let exp = |v: &Value| {
        v.get("experiment")
            .and_then(Value::as_str)
            .map(str::to_string)
    };
    let (a, b) = (exp(report), exp(baseline));
    if a.is_none() || a != b {
        return Err(CliError::Schema(format!(
            "experiment types differ or are missing: report {a:?}, baseline {b:?}"
        )));
    }
    let mut out = DiffReport {
        experiment: a.unwrap_or_default(),
        compared: 0,
        diffs: Vec::new(),
    };
    walk(report, baseline, "$", "", tol, &mut out)?;
    Ok(out)
}

fn walk(
    r: &Value,
    b: &Value,
    path: &str,
    field: &str,
    tol: &ToleranceManifest,
    out: &mut DiffReport,
) -> Result<()> {
    match (r, b) {
        (Value::Object(ro), Value::Object(bo)) => {
            for key in bo.keys() {
                if !ro.contains_key(key) {
                    return Err(CliError::Schema(format!(
                        "{path}.{key} is missing from the report"
                    )));
                }
            }
            for (key, rv) in ro {
                let bv = bo.get(key).ok_or_else(|| {
                    CliError::Schema(format!("{path}.{key} is missing from the baseline"))
                })?;
                walk(rv, bv, &format!("{path}.{key}"), key, tol, out)?;
            }
        }
        (Value::Array(ra), Value::Array(ba)) => {
            if ra.len() != ba.len() {
                return Err(CliError::Schema(format!(
                    "{path} has {} entries in the report and {} in the baseline",
                    ra.len(),
                    ba.len()
                )));
            }
            for (i, (rv, bv)) in ra.iter().zip(ba).enumerate() {
                walk(rv, bv, &format!("{path}[{i}]"), field, tol, out)?;
            }
        }
        (Value::Number(rn), Value::Number(bn)) => {
            out.compared += 1;
            let t = tol.for_field(field);
            let (x, y) = (
                rn.as_f64().unwrap_or(f64::NAN),
                bn.as_f64().unwrap_or(f64::NAN),
            );
            if !t.admits(x, y) {
                out.diffs.push(FieldDiff {
                    path: path.to_string(),
                    report: r.clone(),
                    baseline: b.clone(),
                    abs_diff: Some((x - y).abs()),
                    tolerance: Some(t),
                });
            }
        }
        (Value::Number(_), _) | (_, Value::Number(_)) if !(r.is_null() || b.is_null()) => {
            return Err(CliError::Schema(format!(
                "{path}: number compared with {b}"
            )));
        }
        (Value::Object(_) | Value::Array(_), _) | (_, Value::Object(_) | Value::Array(_)) => {
            return Err(CliError::Schema(format!("{path}: structure differs")));
        }
        _ => {
            out.compared += 1;
            if r != b && !tol.for_field(field).ignore {
                out.diffs.push(FieldDiff {
                    path: path.to_string(),
                    report: r.clone(),
                    baseline: b.clone(),
                    abs_diff: None,
                    tolerance: None,
                });
            }
        }
    }
    Ok(())
}
