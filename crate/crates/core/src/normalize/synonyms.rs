//! Synonym table: free text to canonical tokens.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{FieldKind, TokenResolver};

/// Shipped default table.
pub const DEFAULT_TABLE: &str = include_str!("../../data/synonyms.txt");

#[derive(Debug, Error)]
pub enum SynonymError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read synonym table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalToken {
    pub field_kind: FieldKind,
    pub value: String,
}

/// Trim, lowercase and collapse inner whitespace.
pub fn fold(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: BTreeMap<(FieldKind, String), String>,
}

impl SynonymTable {
    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SynonymError::Syntax {
                line: line_no,
                message,
            };
            let (key, token) = line
                .split_once('=')
                .ok_or_else(|| err("expected `<kind>.<raw> = <token>`".into()))?;
            let (kind, raw) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| err("key needs a `<kind>.` prefix".into()))?;
            let kind = FieldKind::from_name(kind.trim())
                .ok_or_else(|| err(format!("unknown field kind `{}`", kind.trim())))?;
            let token = token.trim();
            if !kind.vocabulary().iter().any(|t| t == token) {
                return Err(err(format!("`{token}` is not a {} token", kind.as_str())));
            }
            let raw = fold(raw);
            if raw.is_empty() {
                return Err(err("empty raw text".into()));
            }
            entries.insert((kind, raw), token.to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, SynonymError> {
        let text = std::fs::read_to_string(path).map_err(|source| SynonymError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped synonym table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (FieldKind, &str, &str)> {
        self.entries
            .iter()
            .map(|((k, raw), tok)| (*k, raw.as_str(), tok.as_str()))
    }

    /// Case-insensitive, whitespace-trimmed lookup. Canonical tokens match
    /// themselves, with spaces or hyphens standing in for underscores.
    pub fn normalize_field(&self, kind: FieldKind, raw: &str) -> Option<CanonicalToken> {
        let folded = fold(raw);
        if folded.is_empty() {
            return None;
        }
        let underscored = folded.replace([' ', '-'], "_");
        let vocab = kind.vocabulary();
        let value = if vocab.contains(&underscored) {
            underscored
        } else {
            self.entries.get(&(kind, folded))?.clone()
        };
        Some(CanonicalToken {
            field_kind: kind,
            value,
        })
    }
}

impl TokenResolver for SynonymTable {
    fn resolve(&self, kind: FieldKind, raw: &str) -> Option<String> {
        self.normalize_field(kind, raw).map(|t| t.value)
    }
}

/// [`SynonymTable::normalize_field`] against the shipped table.
pub fn normalize_field(kind: FieldKind, raw: &str) -> Option<CanonicalToken> {
    thread_local! {
        static TABLE: SynonymTable = SynonymTable::builtin();
    }
    TABLE.with(|t| t.normalize_field(kind, raw))
}
