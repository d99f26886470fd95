//! Flat TOML config files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Key/value pairs from a config file; keys may use `-` or `_`.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Validation(format!("bad config file: {e}")))?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            let v = serde_json::to_value(&v).map_err(|e| CliError::Validation(e.to_string()))?;
            values.insert(k.replace('-', "_"), v);
        }
        Ok(Self { values })
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fills every unset field of `args` from the file and removes the keys
    /// it used. A field is unset when it is `None` or an empty list.
    pub fn fill<T: Serialize + DeserializeOwned>(&mut self, args: T) -> Result<T, CliError> {
        let mut obj =
            match serde_json::to_value(&args).map_err(|e| CliError::Validation(e.to_string()))? {
                Value::Object(o) => o,
                _ => return Ok(args),
            };
        for (k, v) in obj.iter_mut() {
            let unset = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
            if !unset {
                self.values.remove(k);
                continue;
            }
            if let Some(c) = self.values.remove(k) {
                *v = match (&*v, c) {
                    (Value::Array(_), Value::Array(a)) => Value::Array(a),
                    (Value::Array(_), c) => Value::Array(vec![c]),
                    (_, c) => c,
                };
            }
        }
        serde_json::from_value(Value::Object(obj))
            .map_err(|e| CliError::Validation(format!("bad config value: {e}")))
    }

    /// Fails if the file holds keys no flag consumed.
    pub fn finish(self) -> Result<(), CliError> {
        if self.values.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.values.keys().cloned().collect();
            Err(CliError::Validation(format!(
                "unknown config keys: {}",
                keys.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct A {
        eps: Option<f64>,
        seed: Option<u64>,
        dist: Vec<String>,
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = ConfigFile::parse("eps = 0.3\nseed = 9\ndist = \"uniform:4\"").unwrap();
        let a = c
            .fill(A {
                eps: Some(0.1),
                seed: None,
                dist: vec![],
            })
            .unwrap();
        assert_eq!(
            a,
            A {
                eps: Some(0.1),
                seed: Some(9),
                dist: vec!["uniform:4".into()]
            }
        );
        c.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = ConfigFile::parse("epsilon = 0.3").unwrap();
        c.fill(A {
            eps: None,
            seed: None,
            dist: vec![],
        })
        .unwrap();
        assert!(c.finish().is_err());
    }
}
