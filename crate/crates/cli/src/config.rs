//! TOML experiment configs with `key=value` overrides.

use hystchain::experiments::ExperimentSpec;
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Parses a `key=value` override. The value is read as a TOML literal and
/// falls back to a plain string, so `model=II` and `params.damping=0.1` both
/// work.
pub fn parse_override(raw: &str) -> Result<(String, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Validation(format!("override `{raw}` has an empty key")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Sets a dotted `key` inside `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Field holding the base seed for each experiment kind, if any.
fn seed_field(kind: &str) -> Option<&'static str> {
    match kind {
        "single" | "wavepacket" => Some("seed"),
        "ensemble" | "fcr-dist" => Some("seed_base"),
        _ => None,
    }
}

/// Resolves a config table into a validated spec.
///
/// `kind` fills in the experiment kind when the table lacks one and must
/// agree with it otherwise. Defaults are materialised by deserialisation and
/// unknown keys are rejected.
pub fn spec_from_table(
    mut table: Table,
    kind: Option<&str>,
    overrides: &[(String, Value)],
    seed: Option<u64>,
) -> Result<(ExperimentSpec, Vec<String>), CliError> {
    match (kind, table.get("kind")) {
        (Some(k), None) => {
            table.insert("kind".into(), Value::String(k.into()));
        }
        (Some(k), Some(Value::String(found))) if found != k => {
            return Err(CliError::Validation(format!(
                "config is for `{found}` but the `{k}` subcommand was used"
            )));
        }
        _ => {}
    }
    for (k, v) in overrides {
        apply_override(&mut table, k, v.clone())?;
    }
    if let Some(seed) = seed {
        let kind = table.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
        let field = seed_field(&kind)
            .ok_or_else(|| CliError::Validation(format!("`{kind}` runs take no seed")))?;
        let seed = i64::try_from(seed)
            .map_err(|_| CliError::Validation("seed must fit in a signed 64-bit integer".into()))?;
        table.insert(field.into(), Value::Integer(seed));
    }
    let spec = ExperimentSpec::deserialize(Value::Table(table))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let warnings = spec.validate()?;
    Ok((spec, warnings))
}

/// Parses TOML text, or the `spec` echo of a JSON manifest, into a spec.
pub fn parse_config(
    text: &str,
    kind: Option<&str>,
    overrides: &[(String, Value)],
    seed: Option<u64>,
) -> Result<(ExperimentSpec, Vec<String>), CliError> {
    let table = if text.trim_start().starts_with('{') {
        let json: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
        let spec = json
            .get("spec")
            .ok_or_else(|| CliError::Validation("manifest has no `spec` entry".into()))?;
        Table::deserialize(spec.clone()).map_err(|e| CliError::Validation(format!("manifest spec: {e}")))?
    } else {
        text.parse::<Table>().map_err(|e| CliError::Validation(e.to_string()))?
    };
    spec_from_table(table, kind, overrides, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values() {
        assert_eq!(parse_override("a=1").unwrap().1, Value::Integer(1));
        assert_eq!(parse_override("a.b = 0.5").unwrap(), ("a.b".into(), Value::Float(0.5)));
        assert_eq!(parse_override("model=II").unwrap().1, Value::String("II".into()));
        assert_eq!(parse_override("x=[1, 2]").unwrap().1, Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn nested_override_creates_tables() {
        let mut t = Table::new();
        apply_override(&mut t, "params.damping", Value::Float(0.1)).unwrap();
        assert_eq!(t["params"]["damping"].as_float(), Some(0.1));
        t.insert("x".into(), Value::Integer(1));
        assert!(apply_override(&mut t, "x.y", Value::Integer(2)).is_err());
    }
}
