//! Flat `key = value` configuration files with `[section]` headers.
//! Comments start with `#`; values are parsed on demand.

use std::collections::BTreeMap;
use std::path::Path;

use crate::BenchError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(BenchError::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    idx + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Section<'a> {
        Section {
            name,
            values: self.sections.get(name),
        }
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Section<'a> {
    name: &'a str,
    values: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.and_then(|m| m.get(key)).map(String::as_str)
    }

    pub fn str_or<'b>(&self, key: &str, default: &'b str) -> &'b str
    where
        'a: 'b,
    {
        self.raw(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<&'a str, BenchError> {
        self.raw(key).ok_or_else(|| {
            BenchError::Config(format!("missing key '{key}' in section [{}]", self.name))
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T, BenchError> {
        raw.parse().map_err(|_| {
            BenchError::Config(format!(
                "[{}] {key} = '{raw}' cannot be parsed as {}",
                self.name,
                std::any::type_name::<T>()
            ))
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, BenchError> {
        self.raw(key).map_or(Ok(default), |raw| self.parse(key, raw))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, BenchError> {
        self.raw(key).map_or(Ok(default), |raw| self.parse(key, raw))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, BenchError> {
        self.raw(key).map_or(Ok(default), |raw| self.parse(key, raw))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, BenchError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(other) => Err(BenchError::Config(format!(
                "[{}] {key} = '{other}' is not a boolean",
                self.name
            ))),
        }
    }

    /// Comma-separated list; empty or missing value gives an empty list.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|raw| {
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_comments() {
        let cfg = ConfigFile::parse(
            "# experiment grid\n[experiment]\ndataset = data/pubmed\nmodels = gcn, gat\n\n[gcn]\nepochs = 150\n",
        )
        .unwrap();
        assert_eq!(cfg.section("experiment").require("dataset").unwrap(), "data/pubmed");
        assert_eq!(cfg.section("experiment").list("models"), vec!["gcn", "gat"]);
        assert_eq!(cfg.section("gcn").usize_or("epochs", 300).unwrap(), 150);
        assert_eq!(cfg.section("gcn").usize_or("patience", 30).unwrap(), 30);
        assert!(!cfg.has_section("gat"));
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(ConfigFile::parse("[a]\nnot a pair\n").is_err());
    }

    #[test]
    fn type_errors_name_the_key() {
        let cfg = ConfigFile::parse("[x]\nepochs = soon\n").unwrap();
        let err = cfg.section("x").usize_or("epochs", 1).unwrap_err();
        assert!(err.to_string().contains("epochs"));
    }
}
