//! Flat `key = value` text used by config files and the checkpoint header.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parsed<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("cannot parse `{key}` value `{v}`")))
            })
            .transpose()
    }

    pub fn required<V: FromStr>(&self, key: &str) -> Result<V> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    /// Rejects keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_garbage() {
        let kv = KeyValues::parse("# header\nbase_lr = 0.004  # comment\n\nsteps=3\n").unwrap();
        assert_eq!(kv.required::<f64>("base_lr").unwrap(), 0.004);
        assert_eq!(kv.required::<usize>("steps").unwrap(), 3);
        assert!(kv.check_known(&["base_lr"]).is_err());
        assert!(KeyValues::parse("novalue\n").is_err());
        assert!(KeyValues::parse("a=1\na=2\n").is_err());
        assert!(kv.required::<usize>("base_lr").is_err());
    }
}
