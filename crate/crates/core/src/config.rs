//! Run configuration: line-oriented `key = value` text.
//!
//! ```text
//! # comment
//! seed = 7
//! [train]
//! epochs = 20        # becomes the key "train.epochs"
//! ```
//!
//! Command-line `--set key=value` pairs override file values. A [`Reader`]
//! hands out typed values, remembers every value it returned (defaults
//! included) and renders them as a resolved echo that, loaded again,
//! reproduces the run.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

/// Environment variable consulted when neither flag nor file sets a seed.
pub const SEED_ENV: &str = "RVAE_SEED";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", no + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("unterminated section header {line:?}")))?
                    .trim();
                if !valid_name(name) {
                    return Err(at(format!("bad section name {name:?}")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            let k = k.trim();
            if !valid_name(k) {
                return Err(at(format!("bad key {k:?}")));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(at(format!("duplicate key {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for p in pairs {
            let p = p.as_ref();
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {p:?} is not key=value")))?;
            let k = k.trim();
            if !k.split('.').all(valid_name) {
                return Err(Error::Config(format!("bad override key {k:?}")));
            }
            self.set(k, v.trim());
        }
        Ok(())
    }

    pub fn reader(&self) -> Reader<'_> {
        Reader {
            map: self,
            used: RefCell::default(),
            resolved: RefCell::default(),
        }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

/// Typed access that tracks which keys were consumed.
#[derive(Debug)]
pub struct Reader<'a> {
    map: &'a ConfigMap,
    used: RefCell<BTreeSet<String>>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Reader<'_> {
    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse()
            .map_err(|_| Error::Config(format!("cannot parse {key} = {raw:?}")))
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string());
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T> {
        let v = match self.map.get(key) {
            Some(raw) => self.parse_value(key, raw)?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&self, key: &str) -> Result<T> {
        let raw = self
            .map
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
        let v: T = self.parse_value(key, raw)?;
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            Some(_) => self.require(key).map(Some),
            None => Ok(None),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: Clone,
    {
        let v = match self.map.get(key) {
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| self.parse_value(key, s))
                .collect::<Result<Vec<T>>>()?,
            None => default.to_vec(),
        };
        let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        self.record(key, text);
        Ok(v)
    }

    /// `seed` key, falling back to `$RVAE_SEED`, then 0.
    pub fn seed(&self) -> Result<u64> {
        if self.map.get("seed").is_some() {
            return self.require("seed");
        }
        let seed = match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
            Err(_) => 0,
        };
        self.record("seed", seed.to_string());
        Ok(seed)
    }

    /// Errors on keys nobody read; otherwise returns the resolved echo.
    pub fn finish(self) -> Result<String> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .map
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown key(s): {}", unknown.join(", "))));
        }
        Ok(render(&self.resolved.borrow()))
    }
}

/// Top-level keys first, then one `[section]` block per prefix.
fn render(values: &BTreeMap<String, String>) -> String {
    let mut top = String::new();
    let mut sections: BTreeMap<&str, String> = BTreeMap::new();
    for (k, v) in values {
        match k.split_once('.') {
            Some((sec, rest)) => sections.entry(sec).or_default().push_str(&format!("{rest} = {v}\n")),
            None => top.push_str(&format!("{k} = {v}\n")),
        }
    }
    let mut out = top;
    for (sec, body) in sections {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[{sec}]\n{body}"));
    }
    out
}
