//! Flat key-value config files. Keys mirror long flag names (`max-iter`,
//! `capture-tol`, ...); underscores are accepted in place of dashes. A flag on
//! the command line always wins over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, toml::Value>,
}

impl FileConfig {
    pub fn load(path: &Path, allowed: &[&str]) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        FileConfig::parse(&text, allowed)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, allowed: &[&str]) -> Result<FileConfig, String> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let norm = key.replace('_', "-");
            if !allowed.contains(&norm.as_str()) {
                return Err(format!("unknown key `{key}`"));
            }
            if matches!(value, toml::Value::Table(_)) {
                return Err(format!("key `{key}` must hold a plain value"));
            }
            values.insert(norm, value);
        }
        Ok(FileConfig { values })
    }

    fn scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            toml::Value::Boolean(b) => Ok(b.to_string()),
            _ => Err(CliError::Usage(format!(
                "config key `{key}` must be a scalar"
            ))),
        }
    }

    /// `flag` if given, else the parsed file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        let s = FileConfig::scalar(key, v)?;
        s.parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }

    /// Repeatable flag; the file may hold a string or an array of strings.
    pub fn list<T: FromStr>(&self, flag: Vec<T>, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        let items = match self.values.get(key) {
            None => return Ok(Vec::new()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| FileConfig::scalar(key, v))
                .collect::<Result<Vec<_>, _>>()?,
            Some(v) => vec![FileConfig::scalar(key, v)?],
        };
        items
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
            })
            .collect()
    }
}
