//! Canonical JSON encoding.
//!
//! Object keys are sorted by byte order, there is no insignificant
//! whitespace, integral numbers are written without a fractional part and
//! other numbers use the shortest decimal that round-trips. Two documents
//! that are equal after a JSON round trip always encode to the same bytes.

use serde::{Serialize, Serializer};
use serde_json::{Number, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("value cannot be encoded canonically: {0}")]
pub struct EncodingFault(pub String);

/// Converts any serializable value into a JSON document.
///
/// Fails on values JSON cannot carry. Non-finite floats must be routed
/// through [`finite`] to be caught; `serde_json` would otherwise turn them
/// into `null` silently.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Result<Value, EncodingFault> {
    serde_json::to_value(value).map_err(|e| EncodingFault(e.to_string()))
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EncodingFault> {
    Ok(value_to_vec(&to_value(value)?))
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String, EncodingFault> {
    Ok(value_to_string(&to_value(value)?))
}

pub fn value_to_vec(value: &Value) -> Vec<u8> {
    value_to_string(value).into_bytes()
}

pub fn value_to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Parses bytes and re-encodes them canonically.
pub fn canonicalize(bytes: &[u8]) -> Result<Vec<u8>, serde_json::Error> {
    let value: Value = serde_json::from_slice(bytes)?;
    Ok(value_to_vec(&value))
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's map is ordered already unless `preserve_order` is
            // switched on somewhere in the dependency graph.
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(out, key);
                out.push(':');
                write_value(out, item);
            }
            out.push('}');
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    // serde_json's escaping is already minimal and deterministic.
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

fn write_number(out: &mut String, n: &Number) {
    if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else if let Some(f) = n.as_f64() {
        out.push_str(&format_f64(f));
    }
}

/// Formats a finite float under the integral-number rule.
pub fn format_f64(f: f64) -> String {
    debug_assert!(f.is_finite());
    if f == 0.0 {
        "0".to_owned()
    } else if f.fract() == 0.0 {
        format!("{f:.0}")
    } else {
        // Display for f64 is the shortest representation that round-trips.
        format!("{f}")
    }
}

/// `serialize_with` helper that rejects NaN and infinities.
pub fn finite<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else {
        Err(serde::ser::Error::custom(format!("non-finite number {value}")))
    }
}
