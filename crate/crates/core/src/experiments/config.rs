//! Flat `key = value` configuration files. Values use TOML syntax; keys are
//! the long flag names of the subcommand. Command-line flags take priority.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    /// Value and 1-based line of each key.
    values: BTreeMap<String, (toml::Value, usize)>,
}

fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .or_else(|| t.strip_prefix(&format!("\"{key}\"")))
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl ConfigFile {
    /// Parse `text`, rejecting nested tables and keys outside `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Argument(format!("line {line}: {}", e.message()))
        })?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let line = key_line(text, &key);
            if value.is_table() {
                return Err(Error::Argument(format!("line {line}: nested table '{key}' not allowed in a flat config")));
            }
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Argument(format!(
                    "line {line}: unknown key '{key}' (expected one of: {})",
                    allowed.join(", ")
                )));
            }
            values.insert(key, (value, line));
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        Self::parse(&text, allowed)
            .map_err(|e| match e {
                Error::Argument(msg) => Error::Argument(format!("{}: {msg}", path.display())),
                other => other,
            })
    }

    fn bad<T>(&self, key: &str, want: &str) -> Result<T> {
        let line = self.values.get(key).map_or(0, |v| v.1);
        Err(Error::Argument(format!("line {line}: '{key}' must be {want}")))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((toml::Value::Integer(i), _)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => self.bad(key, "a nonnegative integer"),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.usize(key).map(|v| v.map(|v| v as u64))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((toml::Value::Float(x), _)) => Ok(Some(*x)),
            Some((toml::Value::Integer(i), _)) => Ok(Some(*i as f64)),
            Some(_) => self.bad(key, "a number"),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((toml::Value::String(s), _)) => Ok(Some(s.clone())),
            Some(_) => self.bad(key, "a string"),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((toml::Value::Array(items), _)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => self.bad(key, "a list of nonnegative integers"),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => self.bad(key, "a list of nonnegative integers"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_values() {
        let c = ConfigFile::parse("m = 2\nk-list = [3, 4]\nsigma = 0.5\ntruth = \"cubic\"\n", &["m", "k-list", "sigma", "truth"]).unwrap();
        assert_eq!(c.usize("m").unwrap(), Some(2));
        assert_eq!(c.usize_list("k-list").unwrap(), Some(vec![3, 4]));
        assert_eq!(c.f64("sigma").unwrap(), Some(0.5));
        assert_eq!(c.string("truth").unwrap().as_deref(), Some("cubic"));
        assert_eq!(c.usize("seed").unwrap(), None);
    }

    #[test]
    fn diagnostics_carry_lines() {
        let e = ConfigFile::parse("m = 2\n\nbogus = 1\n", &["m"]).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = ConfigFile::parse("m = 2\nseed = = 3\n", &["m", "seed"]).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let c = ConfigFile::parse("m = 2\nseed = \"x\"\n", &["m", "seed"]).unwrap();
        assert!(c.u64("seed").unwrap_err().to_string().contains("line 2"));
        let e = ConfigFile::parse("[t]\nm = 1\n", &["m"]).unwrap_err();
        assert!(e.to_string().contains("nested"), "{e}");
    }
}
