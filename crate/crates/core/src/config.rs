//! `key = value` configuration files, one entry per line, `#` starts a comment.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: key '{key}' given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("missing required key '{0}'")]
    MissingKey(String),
}

/// Parsed entries, keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim().trim_start_matches("--").to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line: i + 1, key });
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Sets a key, replacing any earlier value.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    /// Comma-separated list; empty items are dropped.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(split_list)
    }

    pub fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key).map(|v| parse_numbers(key, v)).transpose()
    }
}

pub fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_numbers(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    split_list(v)
        .iter()
        .map(|s| {
            s.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                key: key.to_string(),
                reason: format!("'{s}': {e}"),
            })
        })
        .collect()
}

/// Lenient boolean: true/false, yes/no, on/off, 1/0.
pub fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("'{v}' is not a boolean"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let kv = KeyValues::parse(
            "# header\ninput = d.csv\n\ncovariates = a, b ,c # trailing\n--ratio=2\n",
        )
        .unwrap();
        assert_eq!(kv.get("input"), Some("d.csv"));
        assert_eq!(kv.list("covariates").unwrap(), ["a", "b", "c"]);
        assert_eq!(kv.parsed::<usize>("ratio").unwrap(), Some(2));
        assert_eq!(kv.parsed::<usize>("seed").unwrap(), None);
    }

    #[test]
    fn syntax_errors_name_the_line() {
        assert_eq!(
            KeyValues::parse("a = 1\nbogus\n").unwrap_err(),
            ConfigError::Syntax { line: 2 }
        );
        assert!(matches!(
            KeyValues::parse("a = 1\na = 2\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let kv = KeyValues::parse("ratio = two\n").unwrap();
        assert!(matches!(
            kv.parsed::<usize>("ratio"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert_eq!(
            kv.check_keys(&["seed"]),
            Err(ConfigError::UnknownKey("ratio".into()))
        );
        assert!(parse_bool("replace", "maybe").is_err());
        assert!(parse_bool("replace", "Yes").unwrap());
    }
}
