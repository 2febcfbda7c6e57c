//! Flat `key = value` config files.
//!
//! Keys are the field names of the target struct. Lines starting with `#`
//! and blank lines are ignored. Unknown keys, repeated keys and values that
//! do not fit the field's type are errors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::read_to_string;

/// Parses `text` as overrides on top of `defaults`.
pub fn parse_config<T: Serialize + DeserializeOwned>(text: &str, defaults: &T) -> Result<T> {
    let Value::Object(mut fields) = serde_json::to_value(defaults).expect("configs serialize") else {
        unreachable!("configs are structs")
    };
    let mut seen = BTreeSet::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Config(format!("line {}: {msg}", no + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = fields.get_mut(key).ok_or_else(|| err(format!("unknown key `{key}`")))?;
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        *slot = typed_value(slot, value).ok_or_else(|| err(format!("bad value `{value}` for `{key}`")))?;
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| Error::Config(e.to_string()))
}

fn typed_value(current: &Value, text: &str) -> Option<Value> {
    match current {
        Value::Bool(_) => text.parse::<bool>().ok().map(Value::Bool),
        Value::Number(n) if n.is_f64() => text.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map(Value::Number),
        Value::Number(_) => text.parse::<u64>().ok().map(Value::from),
        Value::String(_) => Some(Value::String(text.to_string())),
        _ => None,
    }
}

pub fn load_config<T: Serialize + DeserializeOwned>(path: &Path, defaults: &T) -> Result<T> {
    parse_config(&read_to_string(path)?, defaults).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders every field as `key = value`, one per line, sorted by key.
pub fn render_config<T: Serialize>(config: &T) -> String {
    let Value::Object(fields) = serde_json::to_value(config).expect("configs serialize") else {
        unreachable!("configs are structs")
    };
    let mut out = String::new();
    for (key, value) in fields {
        let text = match value {
            Value::String(s) => s,
            other => other.to_string(),
        };
        out.push_str(&format!("{key} = {text}\n"));
    }
    out
}
