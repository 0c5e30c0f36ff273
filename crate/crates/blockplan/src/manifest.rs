//! Textual CFG manifests.
//!
//! One manifest document describes one target binary, line by line:
//!
//! ```text
//! # comment
//! binary query
//! function dispatch entry start
//! block start
//! block done
//! edge start done
//! call dispatch helper      # call-graph fact, accepted and ignored
//! ```
//!
//! Block names are local to their function; the triple
//! (binary, function, index) identifies a block globally.

use crate::cfg::DUMMY_MARKER;
use crate::error::PlanError;

/// Global identity of one basic block: the declaring binary, the function,
/// and the block's position in the function's (possibly split) block list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId {
    pub binary: String,
    pub function: String,
    pub index: u32,
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.binary, self.function, self.index)
    }
}

/// Control flow graph of one function. Blocks are stored by name in
/// declaration order; edges refer to positions in `blocks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCfg {
    pub name: String,
    pub blocks: Vec<String>,
    pub edges: Vec<(u32, u32)>,
    pub entry: u32,
}

impl FunctionCfg {
    pub fn block_index(&self, name: &str) -> Option<u32> {
        self.blocks.iter().position(|b| b == name).map(|i| i as u32)
    }

    /// Successor count per block.
    pub fn out_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.blocks.len()];
        for &(s, _) in &self.edges {
            d[s as usize] += 1;
        }
        d
    }

    /// Predecessor count per block.
    pub fn in_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.blocks.len()];
        for &(_, t) in &self.edges {
            d[t as usize] += 1;
        }
        d
    }
}

/// All functions of one binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryManifest {
    pub binary_id: String,
    pub functions: Vec<FunctionCfg>,
}

impl BinaryManifest {
    /// Total number of blocks over all functions.
    pub fn block_count(&self) -> usize {
        self.functions.iter().map(|f| f.blocks.len()).sum()
    }

    pub fn function(&self, name: &str) -> Option<&FunctionCfg> {
        self.functions.iter().find(|f| f.name == name)
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains(DUMMY_MARKER)
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '-'))
}

struct PendingFunction {
    name: String,
    entry_name: String,
    blocks: Vec<String>,
    // edges by name; resolved once the whole function has been read
    edges: Vec<(String, String)>,
}

impl PendingFunction {
    fn finish(self) -> Result<FunctionCfg, PlanError> {
        let entry = match self.blocks.iter().position(|b| *b == self.entry_name) {
            Some(i) => i as u32,
            None => {
                return Err(PlanError::MissingEntry {
                    function: self.name,
                    entry: self.entry_name,
                })
            }
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (src, dst) in &self.edges {
            let s = self.blocks.iter().position(|b| b == src).ok_or_else(|| PlanError::DanglingEdge {
                function: self.name.clone(),
                block: src.clone(),
            })?;
            let d = self.blocks.iter().position(|b| b == dst).ok_or_else(|| PlanError::DanglingEdge {
                function: self.name.clone(),
                block: dst.clone(),
            })?;
            let e = (s as u32, d as u32);
            if edges.contains(&e) {
                return Err(PlanError::DuplicateEdge {
                    function: self.name,
                    src: src.clone(),
                    dst: dst.clone(),
                });
            }
            edges.push(e);
        }
        Ok(FunctionCfg {
            name: self.name,
            blocks: self.blocks,
            edges,
            entry,
        })
    }
}

/// Parse one manifest document (exactly one `binary` declaration).
pub fn parse_manifest(text: &str) -> Result<BinaryManifest, PlanError> {
    let mut binary_id: Option<String> = None;
    let mut functions: Vec<FunctionCfg> = Vec::new();
    let mut current: Option<PendingFunction> = None;

    let syntax = |line: usize, col: usize, msg: &str| PlanError::Syntax {
        line,
        col,
        msg: msg.to_string(),
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut words = Vec::new();
        let mut cols = Vec::new();
        for (off, w) in split_with_offsets(line) {
            words.push(w);
            cols.push(off + 1);
        }
        if words.is_empty() {
            continue;
        }
        let col_of = |i: usize| cols.get(i).copied().unwrap_or(line.len() + 1);
        let expect_name = |i: usize| -> Result<String, PlanError> {
            let w = words
                .get(i)
                .ok_or_else(|| syntax(line_no, line.len() + 1, "missing operand"))?;
            if !valid_name(w) {
                return Err(if w.contains(DUMMY_MARKER) {
                    PlanError::ReservedName { name: w.to_string() }
                } else {
                    syntax(line_no, col_of(i), &format!("invalid name `{w}`"))
                });
            }
            Ok((*w).to_string())
        };
        let expect_arity = |n: usize| -> Result<(), PlanError> {
            if words.len() != n {
                Err(syntax(line_no, col_of(n.min(words.len())), "wrong number of operands"))
            } else {
                Ok(())
            }
        };

        match words[0] {
            "binary" => {
                expect_arity(2)?;
                let id = expect_name(1)?;
                if binary_id.is_some() {
                    return Err(syntax(line_no, col_of(0), "multiple `binary` declarations in one document"));
                }
                binary_id = Some(id);
            }
            "function" => {
                if binary_id.is_none() {
                    return Err(syntax(line_no, col_of(0), "`function` before `binary`"));
                }
                expect_arity(4)?;
                if words[2] != "entry" {
                    return Err(syntax(line_no, col_of(2), "expected `entry`"));
                }
                let name = expect_name(1)?;
                let entry_name = expect_name(3)?;
                if let Some(f) = current.take() {
                    functions.push(f.finish()?);
                }
                if functions.iter().any(|f| f.name == name) {
                    return Err(PlanError::DuplicateFunction { function: name });
                }
                current = Some(PendingFunction {
                    name,
                    entry_name,
                    blocks: Vec::new(),
                    edges: Vec::new(),
                });
            }
            "block" => {
                expect_arity(2)?;
                let name = expect_name(1)?;
                let f = current
                    .as_mut()
                    .ok_or_else(|| syntax(line_no, col_of(0), "`block` outside a function"))?;
                if f.blocks.contains(&name) {
                    return Err(PlanError::DuplicateBlock {
                        function: f.name.clone(),
                        block: name,
                    });
                }
                f.blocks.push(name);
            }
            "edge" => {
                expect_arity(3)?;
                let src = expect_name(1)?;
                let dst = expect_name(2)?;
                let f = current
                    .as_mut()
                    .ok_or_else(|| syntax(line_no, col_of(0), "`edge` outside a function"))?;
                f.edges.push((src, dst));
            }
            // Call-graph facts are part of the global view but play no role
            // in counter assignment; accepted and ignored.
            "call" => {
                expect_arity(3)?;
                expect_name(1)?;
                expect_name(2)?;
            }
            other => {
                return Err(syntax(line_no, col_of(0), &format!("unknown directive `{other}`")));
            }
        }
    }

    if let Some(f) = current.take() {
        functions.push(f.finish()?);
    }
    let binary_id = binary_id.ok_or_else(|| PlanError::Syntax {
        line: text.lines().count() + 1,
        col: 1,
        msg: "no `binary` declaration".to_string(),
    })?;
    Ok(BinaryManifest { binary_id, functions })
}

fn split_with_offsets(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |w| {
        // offset of this word within the line (words are unique slices)
        let off = w.as_ptr() as usize - line.as_ptr() as usize;
        (off, w)
    })
}

/// Render a manifest back into the document grammar. Used for shipping
/// hand-maintained manifests generated from in-code block tables.
pub fn render_manifest(m: &BinaryManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!("binary {}\n", m.binary_id));
    for f in &m.functions {
        out.push_str(&format!("function {} entry {}\n", f.name, f.blocks[f.entry as usize]));
        for b in &f.blocks {
            out.push_str(&format!("block {b}\n"));
        }
        for &(s, d) in &f.edges {
            out.push_str(&format!("edge {} {}\n", f.blocks[s as usize], f.blocks[d as usize]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_two_block_function() {
        let m = parse_manifest("binary x\nfunction f entry A\nblock A\nblock B\nedge A B\n").unwrap();
        assert_eq!(m.binary_id, "x");
        assert_eq!(m.block_count(), 2);
        let f = m.function("f").unwrap();
        assert_eq!(f.entry, 0);
        assert_eq!(f.edges, vec![(0, 1)]);
    }

    #[test]
    fn rejects_dangling_edge_endpoint() {
        let err = parse_manifest("binary x\nfunction f entry A\nblock A\nedge A Z\n").unwrap_err();
        assert_eq!(
            err,
            PlanError::DanglingEdge { function: "f".into(), block: "Z".into() }
        );
    }

    #[test]
    fn rejects_duplicate_block() {
        let err = parse_manifest("binary x\nfunction f entry A\nblock A\nblock A\n").unwrap_err();
        assert!(matches!(err, PlanError::DuplicateBlock { .. }));
    }

    #[test]
    fn rejects_missing_entry() {
        let err = parse_manifest("binary x\nfunction f entry E\nblock A\n").unwrap_err();
        assert!(matches!(err, PlanError::MissingEntry { .. }));
    }

    #[test]
    fn rejects_duplicate_edge_and_reserved_names() {
        let err =
            parse_manifest("binary x\nfunction f entry A\nblock A\nblock B\nedge A B\nedge A B\n").unwrap_err();
        assert!(matches!(err, PlanError::DuplicateEdge { .. }));
        let err = parse_manifest("binary x\nfunction f entry a__crit\nblock a__crit\n").unwrap_err();
        assert!(matches!(err, PlanError::ReservedName { .. }));
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse_manifest("binary x\nfunction f entry A\nblock A\n  blocc B\n").unwrap_err();
        assert_eq!(
            err,
            PlanError::Syntax { line: 4, col: 3, msg: "unknown directive `blocc`".into() }
        );
    }

    #[test]
    fn comments_and_call_facts_are_ignored() {
        let doc = "# top\nbinary x\nfunction f entry A # trailing\nblock A\ncall f g\n";
        let m = parse_manifest(doc).unwrap();
        assert_eq!(m.block_count(), 1);
    }

    #[test]
    fn render_round_trips() {
        let doc = "binary x\nfunction f entry A\nblock A\nblock B\nedge A B\n";
        let m = parse_manifest(doc).unwrap();
        assert_eq!(parse_manifest(&render_manifest(&m)).unwrap(), m);
    }
}
