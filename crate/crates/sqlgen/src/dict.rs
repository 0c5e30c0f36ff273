//! Dialect dictionary: single-token entries grouped into keywords,
//! function names, and type names.
//!
//! The file format carries no category markers, so loading classifies
//! each entry by shape: identifiers with a lowercase letter are taken as
//! callable function names (dialect builtins are conventionally
//! lowercase, like `pg_cancel_backend`); everything else, including
//! uppercase dialect keywords, literals and operator symbols, counts as a
//! keyword. The type bucket holds the grammar's own column types.

use crate::error::SqlError;
use crate::lex::{tokenize, TokenKind};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    pub keywords: Vec<String>,
    pub functions: Vec<String>,
    pub types: Vec<String>,
}

impl Dictionary {
    /// The grammar's own tokens: every keyword, the two column types, and
    /// one generic aggregate so the function bucket is never empty.
    pub fn builtin() -> Dictionary {
        let mut d = Dictionary::default();
        for kw in crate::lex::KEYWORDS {
            if matches!(*kw, "INT" | "TEXT") {
                d.types.push((*kw).to_string());
            } else {
                d.keywords.push((*kw).to_string());
            }
        }
        d.functions.push("count".to_string());
        d
    }

    /// Parse dictionary file text (one token per line, `#` comments) and
    /// merge the entries into `self`.
    pub fn load_entries(&mut self, text: &str) -> Result<usize, SqlError> {
        let mut added = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks = tokenize(line);
            if toks.len() != 1 {
                return Err(SqlError::DictionaryEntry {
                    line: i + 1,
                    msg: format!("`{line}` is not a single token"),
                });
            }
            let t = &toks[0];
            let entry = t.source_form();
            let bucket = match t.kind {
                TokenKind::Keyword => {
                    if matches!(t.text.as_str(), "INT" | "TEXT") {
                        &mut self.types
                    } else {
                        &mut self.keywords
                    }
                }
                TokenKind::Ident => {
                    if t.text.chars().any(|c| c.is_ascii_lowercase()) {
                        &mut self.functions
                    } else {
                        &mut self.keywords
                    }
                }
                _ => &mut self.keywords,
            };
            if !bucket.contains(&entry) {
                bucket.push(entry);
                added += 1;
            }
        }
        Ok(added)
    }

    /// Builtin dictionary extended with file entries.
    pub fn with_entries(text: &str) -> Result<Dictionary, SqlError> {
        let mut d = Dictionary::builtin();
        d.load_entries(text)?;
        Ok(d)
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty() && self.functions.is_empty() && self.types.is_empty()
    }

    pub fn len(&self) -> usize {
        self.keywords.len() + self.functions.len() + self.types.len()
    }

    /// All entries in one deterministic sequence.
    pub fn all_tokens(&self) -> impl Iterator<Item = &str> {
        self.keywords
            .iter()
            .chain(self.functions.iter())
            .chain(self.types.iter())
            .map(|s| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_buckets_are_nonempty() {
        let d = Dictionary::builtin();
        assert!(!d.keywords.is_empty());
        assert!(!d.functions.is_empty());
        assert_eq!(d.types, vec!["INT", "TEXT"]);
        assert!(d.keywords.contains(&"SELECT".to_string()));
    }

    #[test]
    fn entries_classify_by_shape() {
        let text = "# dialect extras\nUNION          # keyword\npg_cancel_backend\nTEXT\n'gw_trap'\n42\n";
        let d = Dictionary::with_entries(text).unwrap();
        assert!(d.keywords.contains(&"UNION".to_string()));
        assert!(d.functions.contains(&"pg_cancel_backend".to_string()));
        assert_eq!(d.types, vec!["INT", "TEXT"]);
        assert!(d.keywords.contains(&"'gw_trap'".to_string()));
        assert!(d.keywords.contains(&"42".to_string()));
    }

    #[test]
    fn multi_token_lines_are_rejected_with_location() {
        let err = Dictionary::with_entries("ok\nnot one token\n").unwrap_err();
        assert_eq!(err, SqlError::DictionaryEntry { line: 2, msg: "`not one token` is not a single token".into() });
    }

    #[test]
    fn duplicate_entries_collapse() {
        let mut d = Dictionary::builtin();
        let n = d.len();
        d.load_entries("SELECT\ncount\n").unwrap();
        assert_eq!(d.len(), n);
    }
}
