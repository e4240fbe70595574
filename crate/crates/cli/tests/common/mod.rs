//! Shared helpers for the CLI tests: binary invocation and a small JSON
//! Schema checker covering the subset the shipped schema uses (type,
//! required, properties, additionalProperties, enum, items).

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub fn stepup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepup"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn read_json(path: &Path) -> Value {
    let text =
        std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

fn type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        other => panic!("schema uses unsupported type {other}"),
    }
}

pub fn validate(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, value),
            Value::Array(ts) => ts
                .iter()
                .any(|t| type_matches(t.as_str().expect("type name"), value)),
            other => panic!("bad type spec {other}"),
        };
        if !ok {
            return Err(format!("{path}: expected type {ty}, got {value}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }
    if let Some(obj) = value.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required {
                let key = key.as_str().expect("required key");
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required field {key}"));
                }
            }
        }
        for (key, field) in obj {
            let sub_path = format!("{path}.{key}");
            if let Some(prop_schema) = props.and_then(|p| p.get(key)) {
                validate(prop_schema, field, &sub_path)?;
            } else {
                match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        return Err(format!("{sub_path}: unexpected field"))
                    }
                    Some(Value::Object(_)) => validate(
                        schema.get("additionalProperties").unwrap(),
                        field,
                        &sub_path,
                    )?,
                    _ => {}
                }
            }
        }
    }
    if let (Some(items), Some(array)) = (schema.get("items"), value.as_array()) {
        for (i, element) in array.iter().enumerate() {
            validate(items, element, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

pub fn assert_valid_summary(dir: &Path) {
    let schema = read_json(&dir.join("schema.json"));
    let summary = read_json(&dir.join("summary.json"));
    if let Err(err) = validate(&schema, &summary, "summary") {
        panic!("summary.json does not validate against schema.json: {err}");
    }
}
