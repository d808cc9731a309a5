//! Flat `key = value` configuration files and output provenance.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value, got `{line}`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Loads `path` when given, otherwise returns an empty configuration.
    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(format!("key `{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    /// Rejects keys outside `known`, so typos fail loudly.
    pub fn ensure_known(&self, known: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "unknown key(s): {}; accepted: {}",
                unknown.join(", "),
                known.join(", ")
            )))
        }
    }

    /// Canonical `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config: &Config) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config.hash(),
        }
    }

    /// One-line `#` comment used at the top of CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# {} {} seed={} config={}\n",
            self.tool, self.version, self.seed, self.config_hash
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_hashes_canonically() {
        let a = Config::parse("# c\nlr = 0.01\n\nepochs=5\n").unwrap();
        let b = Config::parse("epochs = 5\nlr=0.01").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.get("lr", 0.0).unwrap(), 0.01);
        assert_eq!(a.get("missing", 7usize).unwrap(), 7);
    }

    #[test]
    fn errors_are_config_errors() {
        assert!(matches!(Config::parse("novalue"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("a=1\na=2"), Err(Error::Config(_))));
        let c = Config::parse("lr = fast").unwrap();
        assert!(matches!(c.get("lr", 0.0f64), Err(Error::Config(_))));
        assert!(matches!(c.ensure_known(&["epochs"]), Err(Error::Config(_))));
    }
}
