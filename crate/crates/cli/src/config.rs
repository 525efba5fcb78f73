//! Layered run configuration: built-in defaults, then an optional JSON file,
//! then command-line flags. The seed falls back to `MISSBEAM_SEED` and then
//! to 42 when neither the file nor the flags set it.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "MISSBEAM_SEED";
pub const FALLBACK_SEED: u64 = 42;

/// Name of the resolved configuration written next to every output.
pub const CONFIG_FILE: &str = "config.json";

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        other => other,
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn as_object(v: Value, what: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => bail!("{what} must be a JSON object"),
    }
}

/// Merges `defaults`, the optional config file and `flags` (whose unset
/// fields serialize as null) into `C`.
pub fn resolve<C, F>(defaults: &C, file: Option<&Path>, flags: &F) -> Result<C>
where
    C: Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut merged = as_object(serde_json::to_value(defaults)?, "defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        overlay(&mut merged, as_object(strip_nulls(v), "config file")?);
    }
    overlay(&mut merged, as_object(strip_nulls(serde_json::to_value(flags)?), "flags")?);
    serde_json::from_value(Value::Object(merged)).context("invalid configuration")
}

/// The explicit seed if any, else `MISSBEAM_SEED`, else 42.
pub fn resolve_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(FALLBACK_SEED),
    }
}

pub fn write_resolved<C: Serialize>(dir: &Path, config: &C) -> Result<()> {
    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(config)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}
