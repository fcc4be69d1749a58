//! Sectioned key-value text format shared by manifests and phantom specs.
//!
//! ```text
//! document := line*
//! line     := blank | comment | section | entry
//! comment  := '#' <any text>
//! section  := '[' kind ( ' '+ label )? ']'
//! entry    := key '=' value          (whitespace around key and value is trimmed)
//! ```
//!
//! A `#` starts a comment anywhere on a line. Entries before the first
//! section are global.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: String,
    pub label: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub source: String,
    pub global: Vec<Entry>,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut doc = Document {
            source: source.to_string(),
            ..Default::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(inner) = content.strip_prefix('[') {
                let inner = inner
                    .strip_suffix(']')
                    .ok_or_else(|| doc.error(line, "unterminated section header"))?;
                let mut parts = inner.trim().splitn(2, char::is_whitespace);
                let kind = parts.next().unwrap_or("").to_string();
                if kind.is_empty() {
                    return Err(doc.error(line, "empty section name"));
                }
                let label = parts.next().unwrap_or("").trim().to_string();
                doc.sections.push(Section {
                    kind,
                    label,
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| doc.error(line, "expected 'key = value'"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(doc.error(line, "empty key"));
            }
            let entry = Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            };
            match doc.sections.last_mut() {
                Some(s) => s.entries.push(entry),
                None => doc.global.push(entry),
            }
        }
        Ok(doc)
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.clone(),
            line,
            message: message.into(),
        }
    }

    pub fn value<T: std::str::FromStr>(&self, e: &Entry) -> Result<T> {
        e.value
            .parse()
            .map_err(|_| self.error(e.line, format!("{}: cannot parse '{}'", e.key, e.value)))
    }

    /// Whitespace-separated list; an empty value is an empty list.
    pub fn list<T: std::str::FromStr>(&self, e: &Entry) -> Result<Vec<T>> {
        e.value
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| self.error(e.line, format!("{}: cannot parse '{s}'", e.key)))
            })
            .collect()
    }

    pub fn array<T: std::str::FromStr + Copy + Default, const N: usize>(
        &self,
        e: &Entry,
    ) -> Result<[T; N]> {
        let v: Vec<T> = self.list(e)?;
        if v.len() != N {
            return Err(self.error(
                e.line,
                format!("{}: expected {N} values, found {}", e.key, v.len()),
            ));
        }
        let mut out = [T::default(); N];
        out.copy_from_slice(&v);
        Ok(out)
    }
}
