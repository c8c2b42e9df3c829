//! Flat `key = value` text files. Blank lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: n as u64 + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(err(format!("duplicate key {k:?}")));
            }
        }
        Ok(KvMap { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
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

    /// Copy every entry of `other` over this map.
    pub fn overlay(&mut self, other: &KvMap) {
        for (k, v) in other.iter() {
            self.insert(k, v);
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Validation(format!("missing key {key:?}")))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Validation(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_value(key)?
            .ok_or_else(|| Error::Validation(format!("missing key {key:?}")))
    }

    /// Sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_write() {
        let m = KvMap::parse("# c\n\nb = 2\na=x y \n", Path::new("c")).unwrap();
        assert_eq!(m.get("a"), Some("x y"));
        assert_eq!(m.parse_required::<u32>("b").unwrap(), 2);
        assert_eq!(m.to_text(), "a = x y\nb = 2\n");
        assert_eq!(KvMap::parse(&m.to_text(), Path::new("c")).unwrap(), m);
    }

    #[test]
    fn rejects_malformed() {
        assert!(KvMap::parse("novalue\n", Path::new("c")).is_err());
        assert!(KvMap::parse("a = 1\na = 2\n", Path::new("c")).is_err());
        assert!(KvMap::parse(" = 1\n", Path::new("c")).is_err());
        let m = KvMap::parse("a = z\n", Path::new("c")).unwrap();
        assert!(m.parse_value::<f64>("a").is_err());
        assert!(m.parse_value::<f64>("missing").unwrap().is_none());
    }
}
