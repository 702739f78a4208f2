//! Byte-stable JSON output.
//!
//! Object keys are written in sorted order and every non-integer number is
//! rounded to nine significant digits before being printed in its shortest
//! round-trip form. Non-finite numbers become `null`.

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Significant digits kept for floating point output.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Formats a float the way it appears in canonical JSON and CSV output.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    let r = round_sig(x);
    // `-0.0` would otherwise survive as a distinct token
    let r = if r == 0.0 { 0.0 } else { r };
    serde_json::to_string(&r).unwrap_or_else(|_| "null".to_string())
}

/// Serializes any value to canonical JSON text (trailing newline included).
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(is_scalar) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, level, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    indent(level + 1, out);
                    write_value(item, level + 1, out);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                indent(level, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[key.as_str()], level + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(level, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_rounded() {
        let v = json!({"b": 0.1234567891234, "a": [1, 2.5, null], "c": {"z": 1, "y": "s"}});
        let s = to_string(&v).unwrap();
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        let c = s.find("\"c\"").unwrap();
        assert!(a < b && b < c);
        assert!(s.contains("0.123456789"));
        assert!(!s.contains("0.1234567891"));
        assert!(s.contains("[1, 2.5, null]"));
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(format_f64(f64::NAN), "null");
        assert_eq!(format_f64(f64::INFINITY), "null");
        assert_eq!(format_f64(-0.0), "0.0");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 3.0, 12345.678901234, 1e-12 / 7.0, -2.0 / 3.0] {
            let once = round_sig(x);
            assert_eq!(once, round_sig(once));
            let reparsed: f64 = format_f64(x).parse().unwrap();
            assert_eq!(reparsed, once);
        }
    }
}
