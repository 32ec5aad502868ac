//! `key = value` text used by the manifest, configuration and κ files.
//! `#` starts a comment; `[section]` prefixes following keys with `section.`.

use std::path::Path;
use std::str::FromStr;

use crate::error::{IoError, Location, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(path: &Path, text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_owned();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(IoError::format(path, Location::Line(n), "expected `key = value`"));
        };
        let key = match (section.as_str(), k.trim()) {
            (_, "") => return Err(IoError::format(path, Location::Line(n), "empty key")),
            ("", k) => k.to_owned(),
            (s, k) => format!("{s}.{k}"),
        };
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(IoError::format(path, Location::Line(n), format!("`{key}` already set on line {}", prev.line)));
        }
        out.push(Entry { key, value: v.trim().to_owned(), line: n });
    }
    Ok(out)
}

impl Entry {
    pub fn parse<T: FromStr>(&self, path: &Path) -> Result<T> {
        self.value.parse().map_err(|_| {
            IoError::format(
                path,
                Location::Line(self.line),
                format!("invalid value `{}` for `{}`", self.value, self.key),
            )
        })
    }
}

/// Lookup helper over parsed entries that remembers which keys were used.
pub struct Table<'a> {
    path: &'a Path,
    entries: Vec<Entry>,
    used: Vec<bool>,
}

impl<'a> Table<'a> {
    pub fn new(path: &'a Path, text: &str) -> Result<Self> {
        let entries = parse(path, text)?;
        let used = vec![false; entries.len()];
        Ok(Table { path, entries, used })
    }

    pub fn load(path: &'a Path) -> Result<Self> {
        Self::new(path, &crate::error::read_text(path)?)
    }

    pub fn path(&self) -> &Path {
        self.path
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.iter().position(|e| e.key == key) {
            Some(i) => {
                self.used[i] = true;
                self.entries[i].parse(self.path).map(Some)
            }
            None => Ok(None),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| IoError::format(self.path, Location::Field(key.to_owned()), "missing field"))
    }

    /// Overwrite `slot` if `key` is present.
    pub fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Fail on the first key nobody asked for.
    pub fn finish(self) -> Result<()> {
        match self.used.iter().position(|u| !u) {
            Some(i) => Err(IoError::format(
                self.path,
                Location::Line(self.entries[i].line),
                format!("unknown key `{}`", self.entries[i].key),
            )),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_errors() {
        let p = Path::new("c");
        let mut t = Table::new(p, "a = 1 # one\n[map]\ncell_size = 0.5\n\n").unwrap();
        assert_eq!(t.get::<u32>("a").unwrap(), Some(1));
        assert_eq!(t.require::<f64>("map.cell_size").unwrap(), 0.5);
        assert!(t.get::<f64>("b").unwrap().is_none());
        t.finish().unwrap();

        let mut t = Table::new(p, "a = 1\nb = x\n").unwrap();
        assert_eq!(t.get::<f64>("b").unwrap_err().location(), Some(&Location::Line(2)));
        assert_eq!(t.finish().unwrap_err().location(), Some(&Location::Line(1)));
        assert_eq!(parse(p, "a = 1\na = 2\n").unwrap_err().location(), Some(&Location::Line(2)));
        assert_eq!(parse(p, "a 1\n").unwrap_err().location(), Some(&Location::Line(1)));
        let mut t = Table::new(p, "").unwrap();
        assert_eq!(t.require::<f64>("kappa").unwrap_err().location(), Some(&Location::Field("kappa".into())));
    }
}
