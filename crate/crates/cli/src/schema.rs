//! Published JSON schemas and a validator for the subset of JSON Schema they
//! use: `type` (string or list), `required`, `properties`,
//! `additionalProperties: false`, `items`, `enum` and `minimum`.

use serde_json::Value;

use crate::config::ExperimentKind;

pub const CONFIG_SCHEMA: &str = include_str!("../schemas/config.schema.json");
pub const MANIFEST_SCHEMA: &str = include_str!("../schemas/manifest.schema.json");

pub fn report_schema(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SolitaryScan => include_str!("../schemas/report.solitary_scan.schema.json"),
        ExperimentKind::SpCertify => include_str!("../schemas/report.sp_certify.schema.json"),
        ExperimentKind::ResolventCheck => {
            include_str!("../schemas/report.resolvent_check.schema.json")
        }
        ExperimentKind::LinearDecay => include_str!("../schemas/report.linear_decay.schema.json"),
        ExperimentKind::Stability => include_str!("../schemas/report.stability.schema.json"),
        ExperimentKind::Scattering => include_str!("../schemas/report.scattering.schema.json"),
    }
}

/// All violations of `value` against `schema`, as `path: message` lines.
pub fn validate(value: &Value, schema: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(value, schema, "$", &mut errs);
    errs
}

/// Parses a bundled schema and validates against it.
pub fn validate_str(value: &Value, schema: &str) -> Vec<String> {
    match serde_json::from_str::<Value>(schema) {
        Ok(s) => validate(value, &s),
        Err(e) => vec![format!("schema itself is not valid JSON: {e}")],
    }
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        _ => false,
    }
}

fn check(value: &Value, schema: &Value, path: &str, errs: &mut Vec<String>) {
    let Some(schema) = schema.as_object() else {
        return;
    };
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => Vec::new(),
        };
        if !allowed.iter().any(|t| type_matches(value, t)) {
            errs.push(format!(
                "{path}: expected {}, found {}",
                allowed.join(" or "),
                kind_of(value)
            ));
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errs.push(format!(
                "{path}: {value} is not one of {}",
                Value::Array(options.clone())
            ));
        }
    }
    if let (Some(min), Some(v)) = (
        schema.get("minimum").and_then(Value::as_f64),
        value.as_f64(),
    ) {
        if v < min {
            errs.push(format!("{path}: {v} is below the minimum {min}"));
        }
    }
    if let Some(obj) = value.as_object() {
        if let Some(req) = schema.get("required").and_then(Value::as_array) {
            for key in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    errs.push(format!("{path}: missing required field `{key}`"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (key, v) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(v, sub, &format!("{path}.{key}"), errs),
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errs.push(format!("{path}: unexpected field `{key}`"));
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            check(v, items, &format!("{path}[{i}]"), errs);
        }
    }
}

fn kind_of(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn validator_reports_each_rule() {
        let schema = json!({
            "type": "object",
            "required": ["a", "b"],
            "additionalProperties": false,
            "properties": {
                "a": {"type": "number", "minimum": 0},
                "b": {"type": "array", "items": {"type": "string", "enum": ["x", "y"]}},
                "c": {"type": ["number", "null"]}
            }
        });
        assert!(validate(&json!({"a": 1, "b": ["x"], "c": null}), &schema).is_empty());
        let errs = validate(&json!({"a": -1, "b": ["z", 3], "d": 0}), &schema);
        assert_eq!(errs.len(), 4, "{errs:?}");
        let errs = validate(&json!({"b": []}), &schema);
        assert_eq!(errs, vec!["$: missing required field `a`".to_string()]);
        assert!(!validate(&json!(1.5), &json!({"type": "integer"})).is_empty());
    }

    #[test]
    fn bundled_schemas_parse() {
        for kind in [
            ExperimentKind::SolitaryScan,
            ExperimentKind::SpCertify,
            ExperimentKind::ResolventCheck,
            ExperimentKind::LinearDecay,
            ExperimentKind::Stability,
            ExperimentKind::Scattering,
        ] {
            serde_json::from_str::<Value>(report_schema(kind)).unwrap();
        }
        serde_json::from_str::<Value>(CONFIG_SCHEMA).unwrap();
        serde_json::from_str::<Value>(MANIFEST_SCHEMA).unwrap();
    }
}
