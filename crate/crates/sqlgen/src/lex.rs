//! Total lexer for the toy SQL dialect.
//!
//! Tokenizing never fails: unknown characters become single-character
//! symbol tokens and an unterminated string runs to the end of input.
//! Keywords are case-normalized to upper case at lex time; identifiers
//! keep their spelling.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Ident,
    Number,
    Str,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Keyword text is upper-cased; string text is the unescaped content
    /// without quotes; everything else is the source spelling.
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Source form of the token (strings get their quotes back).
    pub fn source_form(&self) -> String {
        match self.kind {
            TokenKind::Str => quote_string(&self.text),
            _ => self.text.clone(),
        }
    }
}

pub fn quote_string(content: &str) -> String {
    format!("'{}'", content.replace('\'', "''"))
}

pub const KEYWORDS: &[&str] = &[
    "ADD", "ALTER", "AND", "ASC", "BY", "CALL", "COLUMN", "CREATE", "DELETE", "DESC", "DROP",
    "FROM", "INSERT", "INT", "INTO", "LIMIT", "NOT", "OR", "ORDER", "RENAME", "SELECT", "SET",
    "TABLE", "TEXT", "TO", "UPDATE", "VALUES", "WHERE",
];

pub fn is_keyword(word: &str) -> bool {
    let upper = word.to_ascii_uppercase();
    KEYWORDS.contains(&upper.as_str())
}

pub fn tokenize(src: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(start, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        // line comment
        if c == '-' && src[start..].starts_with("--") {
            for (_, d) in it.by_ref() {
                if d == '\n' {
                    break;
                }
            }
            continue;
        }
        if c == '_' || c.is_ascii_alphabetic() {
            let mut end = start;
            while let Some(&(i, d)) = it.peek() {
                if d == '_' || d.is_ascii_alphanumeric() {
                    end = i + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            let word = &src[start..end];
            if is_keyword(word) {
                out.push(Token {
                    kind: TokenKind::Keyword,
                    text: word.to_ascii_uppercase(),
                    start,
                    end,
                });
            } else {
                out.push(Token { kind: TokenKind::Ident, text: word.to_string(), start, end });
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = start;
            while let Some(&(i, d)) = it.peek() {
                if d.is_ascii_digit() {
                    end = i + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokenKind::Number,
                text: src[start..end].to_string(),
                start,
                end,
            });
            continue;
        }
        if c == '\'' {
            it.next();
            let mut content = String::new();
            let mut end = start + 1;
            loop {
                match it.next() {
                    Some((i, '\'')) => {
                        end = i + 1;
                        // doubled quote is an escaped quote
                        if let Some(&(_, '\'')) = it.peek() {
                            content.push('\'');
                            let (j, _) = it.next().unwrap();
                            end = j + 1;
                        } else {
                            break;
                        }
                    }
                    Some((i, d)) => {
                        content.push(d);
                        end = i + d.len_utf8();
                    }
                    // unterminated string: keep what we have
                    None => break,
                }
            }
            out.push(Token { kind: TokenKind::Str, text: content, start, end });
            continue;
        }
        // two-character comparison symbols
        let rest = &src[start..];
        let two = ["<=", ">=", "<>", "!="].iter().find(|s| rest.starts_with(**s));
        if let Some(sym) = two {
            it.next();
            it.next();
            out.push(Token {
                kind: TokenKind::Symbol,
                text: (*sym).to_string(),
                start,
                end: start + 2,
            });
            continue;
        }
        it.next();
        out.push(Token {
            kind: TokenKind::Symbol,
            text: c.to_string(),
            start,
            end: start + c.len_utf8(),
        });
    }
    out
}

/// Split a script into statement texts on `;` outside string literals.
pub fn split_statements(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut it = text.chars().peekable();
    while let Some(c) = it.next() {
        if in_str {
            cur.push(c);
            if c == '\'' {
                if it.peek() == Some(&'\'') {
                    cur.push(it.next().unwrap());
                } else {
                    in_str = false;
                }
            }
            continue;
        }
        match c {
            '\'' => {
                in_str = true;
                cur.push(c);
            }
            ';' => {
                let s = cur.trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    let s = cur.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// 1-based line and column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in src.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}
