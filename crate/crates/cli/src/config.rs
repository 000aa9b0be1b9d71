//! Flat key-value configuration with flag-over-file precedence. Every key
//! must be known to the subcommand it feeds, and the resolved values are
//! echoed into the output directory for provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Parsed config file: a single flat table of scalars.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: toml::Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let values: toml::Table =
            text.parse().with_context(|| format!("config {} is not valid TOML", path.display()))?;
        for (key, value) in &values {
            if value.is_table() || value.is_array() {
                bail!("config key `{key}` must be a scalar (flat key-value schema)");
            }
        }
        Ok(FileConfig { values })
    }

    pub fn reject_unknown_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "unknown config key `{key}` (allowed: {})",
                    allowed.join(", ")
                );
            }
        }
        Ok(())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(x)) => Ok(Some(*x as f64)),
            Some(other) => Err(anyhow!("config key `{key}`: expected a number, got {other}")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(x)) if *x >= 0 => Ok(Some(*x as usize)),
            Some(other) => {
                Err(anyhow!("config key `{key}`: expected a nonnegative integer, got {other}"))
            }
        }
    }

    pub fn i32(&self, key: &str) -> Result<Option<i32>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(x)) => Ok(Some(*x as i32)),
            Some(other) => Err(anyhow!("config key `{key}`: expected an integer, got {other}")),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(anyhow!("config key `{key}`: expected a string, got {other}")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(anyhow!("config key `{key}`: expected a boolean, got {other}")),
        }
    }

    /// Comma-separated float list, accepted either as a TOML string or
    /// through a flag.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => Ok(Some(parse_f64_list(&s)?)),
        }
    }
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("`{tok}` is not a number in list `{s}`"))
        })
        .collect()
}

/// Resolved scalar values recorded for provenance.
#[derive(Debug, Default, Clone)]
pub struct ResolvedConfig {
    entries: BTreeMap<String, String>,
}

impl ResolvedConfig {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn put_list(&mut self, key: &str, values: &[f64]) {
        let list = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.entries.insert(key.to_string(), format!("\"{list}\""));
    }

    /// TOML-shaped echo, keys sorted for reproducible bytes.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Missing-required-keys error listing every absent key at once.
pub fn require_all(missing: &[&str]) -> Result<()> {
    if missing.is_empty() {
        Ok(())
    } else {
        bail!("missing required configuration keys: {}", missing.join(", "))
    }
}
