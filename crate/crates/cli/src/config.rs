//! Flat `key = value` configuration with command-line overrides.
//!
//! The manifest written next to every output uses the same format, so a
//! run can be repeated with `--config manifest.txt`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Keys written by the manifest itself; accepted and ignored on input.
const MANIFEST_KEYS: [&str; 2] = ["command", "version"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; keys outside `allowed` are rejected.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got '{line}'", lineno + 1)))?;
            let key = key.trim();
            if MANIFEST_KEYS.contains(&key) {
                continue;
            }
            if !allowed.contains(&key) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}' (allowed: {})",
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, allowed)
    }

    /// Overrides `key` when the flag was given.
    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn set_default(&mut self, key: &str, value: impl Display) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value '{v}' for {key}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| CliError::Usage(format!("missing required setting {key}")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| CliError::Usage(format!("invalid entry '{}' in {key}", s.trim())))
                })
                .collect(),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::Usage(format!("invalid boolean '{v}' for {key}"))),
        }
    }

    /// Manifest text: command, version and every resolved setting.
    pub fn manifest(&self, command: &str) -> String {
        let mut out = format!("command = {command}\nversion = {}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let text = "# comment\nalpha = 0.1\n\np=0.5, 0.9\nversion = 0.0.1\n";
        let mut s = Settings::parse(text, &["alpha", "p", "seed"]).unwrap();
        assert_eq!(s.get::<f64>("alpha").unwrap(), Some(0.1));
        assert_eq!(s.list::<f64>("p").unwrap(), vec![0.5, 0.9]);
        s.set_opt("alpha", Some(0.2));
        s.set_opt::<u64>("seed", None);
        s.set_default("seed", 7);
        s.set_default("alpha", 0.3);
        assert_eq!(s.get::<f64>("alpha").unwrap(), Some(0.2));
        assert_eq!(s.require::<u64>("seed").unwrap(), 7);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(Settings::parse("bogus = 1", &["alpha"]), Err(CliError::Usage(_))));
        assert!(matches!(Settings::parse("alpha", &["alpha"]), Err(CliError::Usage(_))));
        let s = Settings::parse("alpha = x", &["alpha"]).unwrap();
        assert!(s.get::<f64>("alpha").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let mut s = Settings::default();
        s.set_default("alpha", 0.05);
        s.set_default("p", "0.5,0.95");
        let again = Settings::parse(&s.manifest("estimate"), &["alpha", "p"]).unwrap();
        assert_eq!(again, s);
    }
}
