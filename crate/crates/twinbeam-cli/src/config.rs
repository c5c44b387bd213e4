//! Config-file support. A config file supplies values for flags the user
//! did not pass; precedence is always flags > config file > built-in
//! defaults. Two syntaxes are accepted: a JSON object, or `key=value`
//! lines (`#` comments and blank lines ignored).

use crate::error::{CliError, CliResult};
use std::collections::BTreeMap;
use std::path::Path;

/// Keys a config file may set; anything else is rejected loudly.
const KNOWN_KEYS: &[&str] = &[
    "mu1", "mu2", "muk", "tau", "modes", "trials", "seed", "cutoff", "out", "format",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Loads and validates a config file if a path was given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let map = if text.trim_start().starts_with('{') {
            Self::parse_json(&text)?
        } else {
            Self::parse_key_value(&text)?
        };
        for key in map.values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown config key {key:?} (known keys: {})",
                    KNOWN_KEYS.join(", ")
                )));
            }
        }
        Ok(map)
    }

    fn parse_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Usage("config JSON must be an object".into()))?;
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(CliError::Usage(format!(
                        "config key {k:?} has unsupported value {other}"
                    )))
                }
            };
            values.insert(k.clone(), s);
        }
        Ok(Self { values })
    }

    fn parse_key_value(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {} is not key=value: {line:?}", idx + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get_f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.values
            .get(key)
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("config key {key:?} is not a number: {s:?}"))
                })
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.values
            .get(key)
            .map(|s| {
                s.parse::<u64>().map_err(|_| {
                    CliError::Usage(format!("config key {key:?} is not a non-negative integer: {s:?}"))
                })
            })
            .transpose()
    }

    pub fn get_string(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}

/// flags > config > default; errors when a required setting is absent.
pub fn resolve_f64(
    flag: Option<f64>,
    cfg: CliResult<Option<f64>>,
    default: Option<f64>,
    name: &str,
) -> CliResult<f64> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg? {
        return Ok(v);
    }
    default.ok_or_else(|| CliError::Usage(format!("missing required value --{name}")))
}

pub fn resolve_u64(
    flag: Option<u64>,
    cfg: CliResult<Option<u64>>,
    default: Option<u64>,
    name: &str,
) -> CliResult<u64> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg? {
        return Ok(v);
    }
    default.ok_or_else(|| CliError::Usage(format!("missing required value --{name}")))
}
