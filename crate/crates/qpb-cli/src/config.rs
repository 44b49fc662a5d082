//! Experiment config files: a simple `key = value` text format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use qpb::{Error, Result};

#[derive(Debug, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_path(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RawConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    ln + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig { values })
    }

    /// Warns about keys outside the experiment's vocabulary; typos in config
    /// files should not fail silently.
    pub fn warn_unknown(&self, allowed: &[&str]) {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                eprintln!("warning: unknown config key `{key}` ignored");
            }
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        self.parse(key, default)
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        self.parse(key, default)
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        self.parse(key, default)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidParameter(format!("config key {key}: cannot parse `{raw}`"))
            }),
        }
    }

    /// Comma-separated list of reals, e.g. `alphas = 0.1,0.2,0.3`.
    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("config key {key}: bad number `{s}`"))
                    })
                })
                .collect(),
        }
    }
}
