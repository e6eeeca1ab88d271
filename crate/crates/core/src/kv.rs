//! Flat `key = value` configuration text.
//!
//! Lines are `key = value` pairs with dotted keys. Blank lines and lines
//! starting with `#` are ignored. Later assignments override earlier ones,
//! which is how command-line `--set` overrides are layered on top of a file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key `{key}`")]
    Unknown { key: String },
}

impl KvError {
    /// The configuration key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            KvError::Syntax { .. } => None,
            KvError::Missing { key } | KvError::Invalid { key, .. } | KvError::Unknown { key } => {
                Some(key)
            }
        }
    }

    pub fn invalid(key: &str, value: &str, reason: impl fmt::Display) -> Self {
        KvError::Invalid {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }

    /// The same error with `prefix` prepended to its key.
    pub fn prefixed(self, prefix: &str) -> Self {
        match self {
            KvError::Missing { key } => KvError::Missing {
                key: format!("{prefix}{key}"),
            },
            KvError::Invalid { key, value, reason } => KvError::Invalid {
                key: format!("{prefix}{key}"),
                value,
                reason,
            },
            KvError::Unknown { key } => KvError::Unknown {
                key: format!("{prefix}{key}"),
            },
            other => other,
        }
    }
}

/// An ordered map of configuration keys to raw string values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut map = KvMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            map.set_assignment(line).map_err(|_| KvError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
        }
        Ok(map)
    }

    /// Applies one `key=value` assignment, as given on a command line.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), KvError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| KvError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::Syntax {
                line: 0,
                text: assignment.to_string(),
            });
        }
        self.insert(key, value.trim());
        Ok(())
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing {
            key: key.to_string(),
        })
    }

    pub fn parse_required<T>(&self, key: &str) -> Result<T, KvError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| KvError::invalid(key, raw, e))
    }

    pub fn parse_optional<T>(&self, key: &str) -> Result<Option<T>, KvError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| KvError::invalid(key, raw, e)),
        }
    }

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    pub fn with_prefix(&self, prefix: &str) -> KvMap {
        KvMap {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Fails with [`KvError::Unknown`] on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), KvError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(KvError::Unknown { key: k.to_string() }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for KvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parses a comma separated list of reals, e.g. `6.9, 1.0`.
pub fn parse_real_list(key: &str, raw: &str) -> Result<Vec<f64>, KvError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| KvError::invalid(key, raw, e)))
        .collect()
}
