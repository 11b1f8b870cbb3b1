//! Canonical text serialization shared by documents, operations, index files,
//! messages and credentials.
//!
//! Output is JSON with object keys sorted by their UTF-8 bytes, no insignificant
//! whitespace, UTF-8 strings with control characters escaped, and integers only.
//! Parsing is strict: input must already be in canonical form.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("value cannot be serialized: {0}")]
    Serialize(String),
    #[error("floating point numbers have no canonical form")]
    Float,
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("input is not in canonical form")]
    NotCanonical,
}

pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let value =
        serde_json::to_value(value).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
    let mut out = Vec::with_capacity(256);
    write_value(&value, &mut out)?;
    Ok(out)
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonicalError> {
    // write_value only ever emits UTF-8
    to_canonical(value).map(|b| String::from_utf8(b).expect("canonical output is UTF-8"))
}

/// Parses `bytes` and rejects anything that would not re-serialize to the same bytes.
pub fn from_canonical<T: Serialize + DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    let value: T =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Parse(e.to_string()))?;
    if to_canonical(&value)? != bytes {
        return Err(CanonicalError::NotCanonical);
    }
    Ok(value)
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            if n.is_f64() {
                return Err(CanonicalError::Float);
            }
            out.extend_from_slice(n.to_string().as_bytes());
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(k, out);
                out.push(b':');
                write_value(v, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    out.push(b'"');
    for c in s.chars() {
        match c {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\r' => out.extend_from_slice(b"\\r"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\u{0c}' => out.extend_from_slice(b"\\f"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_compact() {
        let v = json!({"b": 1, "a": [true, null, "x"], "c": {"z": 0, "y": -3}});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            r#"{"a":[true,null,"x"],"b":1,"c":{"y":-3,"z":0}}"#
        );
    }

    #[test]
    fn control_characters_escaped() {
        let v = json!({"k": "a\u{1}b\n\"é"});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            "{\"k\":\"a\\u0001b\\n\\\"é\"}"
        );
    }

    #[test]
    fn floats_rejected() {
        assert!(matches!(
            to_canonical(&json!({"x": 1.5})),
            Err(CanonicalError::Float)
        ));
    }

    #[test]
    fn strict_parse_rejects_whitespace_and_order() {
        assert!(from_canonical::<Value>(br#"{"a":1,"b":2}"#).is_ok());
        assert!(matches!(
            from_canonical::<Value>(br#"{"b":2,"a":1}"#),
            Err(CanonicalError::NotCanonical)
        ));
        assert!(matches!(
            from_canonical::<Value>(br#"{"a": 1}"#),
            Err(CanonicalError::NotCanonical)
        ));
    }
}
