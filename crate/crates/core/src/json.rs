//! Sorted-key JSON output shared by every on-disk and wire format.

use serde::Serialize;
use serde_json::Value;

/// Compact JSON with object keys sorted at every depth.
pub fn canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Serialize `value` through [`canonical_string`].
pub fn to_canonical<T: Serialize>(value: &T) -> serde_json::Result<String> {
    Ok(canonical_string(&serde_json::to_value(value)?))
}

/// Indented sorted-key JSON for human-facing reports.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let sorted = sort_value(serde_json::to_value(value)?);
    serde_json::to_string_pretty(&sorted)
}

fn sort_value(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_value(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_value).collect()),
        other => other,
    }
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}
