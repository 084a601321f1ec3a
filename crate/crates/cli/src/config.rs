//! Flat `key = value` configuration files.
//!
//! Keys are case-insensitive and `-` and `_` are interchangeable, so a
//! file can reuse the flag spellings (`eta-l = 0.9`). Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Keys accepted in a configuration file.
pub const KNOWN_KEYS: &[&str] = &[
    "tl", "tr", "eta", "eta_l", "eta_r", "n_tot", "ratio", "probe", "grid", "grid_min", "grid_max", "out", "seed",
    "seeds", "nu", "cutoff", "tail_tol", "mode", "log10_x_min", "log10_x_max",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = normalize(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Like [`Config::resolve`] without a default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs() {
        let c = Config::parse("# comment\n\ntl = 0.4\nETA-L=0.9\n n_tot = 3 \n").unwrap();
        assert_eq!(c.get::<f64>("tl").unwrap(), Some(0.4));
        assert_eq!(c.get::<f64>("eta_l").unwrap(), Some(0.9));
        assert_eq!(c.get::<f64>("n-tot").unwrap(), Some(3.0));
        assert_eq!(c.get::<f64>("tr").unwrap(), None);
    }

    #[test]
    fn precedence() {
        let c = Config::parse("tl = 0.4").unwrap();
        assert_eq!(c.resolve(Some(0.7), "tl", 0.5).unwrap(), 0.7);
        assert_eq!(c.resolve(None, "tl", 0.5).unwrap(), 0.4);
        assert_eq!(c.resolve(None, "tr", 0.5).unwrap(), 0.5);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(Config::parse("tl 0.4"), Err(CliError::Usage(_))));
        assert!(matches!(Config::parse("colour = red"), Err(CliError::Usage(_))));
        let c = Config::parse("tl = abc").unwrap();
        assert!(c.get::<f64>("tl").is_err());
    }
}
