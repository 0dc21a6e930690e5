//! Shared helpers for the integration tests: a small structural validator
//! for the JSON schemas shipped under `schemas/`, plus file conveniences.
//!
//! The validator covers exactly the draft-07 subset those schemas use:
//! `type` (string or array of strings), `enum`, `properties`, `required`,
//! `additionalProperties` (boolean), `items`, `anyOf`, `minimum`, and
//! `$ref` into `#/definitions/...`.

use serde_json::Value;
use std::path::{Path, PathBuf};

/// Root of the repository (two levels above the crate manifest).
pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("crate lives two levels below the repository root")
        .to_path_buf()
}

/// Load a schema from `schemas/<name>.schema.json`.
pub fn load_schema(name: &str) -> Value {
    let path = repo_root().join("schemas").join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

/// Parse a JSON file.
pub fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

/// Validate `value` against `schema`, panicking with a readable path on the
/// first violation.
pub fn assert_valid(schema: &Value, value: &Value, what: &str) {
    if let Err(e) = validate(schema, value) {
        panic!("{what} violates its schema: {e}");
    }
}

pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    validate_at(schema, schema, value, "$")
}

fn resolve_ref<'a>(root: &'a Value, reference: &str) -> Option<&'a Value> {
    let pointer = reference.strip_prefix('#')?;
    root.pointer(pointer)
}

fn type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => {
            value.is_i64()
                || value.is_u64()
                || value.as_f64().is_some_and(|f| f.fract() == 0.0 && f.is_finite())
        }
        other => panic!("schema uses unsupported type '{other}'"),
    }
}

fn validate_at(root: &Value, schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    let obj = schema
        .as_object()
        .ok_or_else(|| format!("{path}: schema node is not an object"))?;

    if let Some(reference) = obj.get("$ref").and_then(Value::as_str) {
        let target = resolve_ref(root, reference)
            .ok_or_else(|| format!("{path}: unresolvable $ref '{reference}'"))?;
        return validate_at(root, target, value, path);
    }

    if let Some(branches) = obj.get("anyOf").and_then(Value::as_array) {
        let mut errors = Vec::new();
        for branch in branches {
            match validate_at(root, branch, value, path) {
                Ok(()) => return Ok(()),
                Err(e) => errors.push(e),
            }
        }
        return Err(format!("{path}: no anyOf branch matched ({})", errors.join("; ")));
    }

    match obj.get("type") {
        Some(Value::String(ty)) => {
            if !type_matches(ty, value) {
                return Err(format!("{path}: expected type {ty}, got {value}"));
            }
        }
        Some(Value::Array(tys)) => {
            let ok = tys
                .iter()
                .filter_map(Value::as_str)
                .any(|ty| type_matches(ty, value));
            if !ok {
                return Err(format!("{path}: value {value} matches none of {tys:?}"));
            }
        }
        _ => {}
    }

    if let Some(allowed) = obj.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }

    if let Some(minimum) = obj.get("minimum").and_then(Value::as_f64) {
        let v = value
            .as_f64()
            .ok_or_else(|| format!("{path}: minimum applied to non-number {value}"))?;
        if v < minimum {
            return Err(format!("{path}: {v} below minimum {minimum}"));
        }
    }

    if let Some(map) = value.as_object() {
        let properties = obj.get("properties").and_then(Value::as_object);
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for name in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(name) {
                    return Err(format!("{path}: missing required field '{name}'"));
                }
            }
        }
        if let Some(props) = properties {
            for (name, sub) in props {
                if let Some(field) = map.get(name) {
                    validate_at(root, sub, field, &format!("{path}.{name}"))?;
                }
            }
        }
        if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
            for name in map.keys() {
                if !properties.map_or(false, |p| p.contains_key(name)) {
                    return Err(format!("{path}: unexpected field '{name}'"));
                }
            }
        }
    }

    if let Some(items) = obj.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, item) in arr.iter().enumerate() {
                validate_at(root, items, item, &format!("{path}[{i}]"))?;
            }
        }
    }

    Ok(())
}
