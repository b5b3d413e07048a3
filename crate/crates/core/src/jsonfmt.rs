//! Deterministic JSON rendering for report artifacts.
//!
//! Byte-identical output across runs and platforms is part of the
//! verification contract, so floats are always printed in one canonical
//! form — scientific notation with 12 significant digits — and object keys
//! are emitted in sorted order (the default `serde_json` map is a BTree).
//! Integers and strings pass through unchanged.

use serde_json::Value;
use std::fmt::Write as _;

/// Canonical float form: 12 significant digits, scientific notation,
/// `-0` normalized to `0`, non-finite values mapped to `null` (JSON has no
/// representation for them).
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_owned();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    format!("{:.11e}", x)
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + 2));
                write_value(out, item, indent + 2);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // serde_json's default map is sorted; iterate as stored.
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent + 2));
                let _ = write!(out, "{}: ", Value::String(key.clone()));
                write_value(out, item, indent + 2);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

/// Renders a JSON document in the canonical deterministic form (sorted
/// keys, canonical floats, two-space indent, trailing newline).
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// Canonical float form for CSV cells (same 12-significant-digit rule;
/// non-finite values become the literal `nan`/`inf` strings, which never
/// appear in passing runs).
pub fn format_csv_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    format!("{:.11e}", x)
}
