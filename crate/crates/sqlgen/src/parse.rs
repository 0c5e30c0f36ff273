//! Recursive-descent parser for the toy SQL dialect.
//!
//! Grammar (statements separated by `;`):
//!
//! ```text
//! select  := SELECT list [FROM id] [WHERE expr] [ORDER BY key,...] [LIMIT num]
//! list    := '*' | expr (',' expr)*
//! key     := expr [ASC|DESC]
//! insert  := INSERT INTO id ['(' id,... ')'] VALUES '(' expr,... ')'
//! update  := UPDATE id SET id '=' expr,... [WHERE expr]
//! delete  := DELETE FROM id [WHERE expr]
//! create  := CREATE TABLE id '(' id type,... ')'        type := INT | TEXT
//! drop    := DROP TABLE id
//! alter   := ALTER TABLE id (ADD COLUMN id type | DROP COLUMN id | RENAME TO id)
//! call    := CALL id '(' [expr,...] ')'
//! expr    := or-chain over AND, comparison, additive, multiplicative,
//!            unary NOT / '-', primary (number, string, ident, func call,
//!            parenthesized)
//! ```
//!
//! Strict parsing demands the whole input conform. Recovering parsing
//! never fails: it salvages every parseable statement, and from broken
//! statements any WHERE / ORDER BY / LIMIT clause that parses on its own.

use crate::ast::{Node, NodeKind};
use crate::error::SqlError;
use crate::lex::{line_col, tokenize, Token, TokenKind};
use crate::pool::{Fragment, FragmentKind};

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
}

type PResult<T> = Result<T, SqlError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: &'a [Token]) -> Parser<'a> {
        Parser { src, toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn error_at(&self, offset: usize, msg: impl Into<String>) -> SqlError {
        let (line, col) = line_col(self.src, offset);
        SqlError::Parse { offset, line, col, msg: msg.into() }
    }

    fn error_here(&self, msg: impl Into<String>) -> SqlError {
        let offset = self.peek().map(|t| t.start).unwrap_or(self.src.len());
        let msg = match self.peek() {
            Some(t) => format!("{} (found `{}`)", msg.into(), t.source_form()),
            None => format!("{} (found end of input)", msg.into()),
        };
        self.error_at(offset, msg)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Keyword && t.text == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<&'a Token> {
        if self.at_kw(kw) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.error_here(format!("expected `{kw}`")))
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Symbol && t.text == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<&'a Token> {
        if self.at_sym(sym) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.error_here(format!("expected `{sym}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<Node> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok(Node::leaf(NodeKind::Identifier, "ident", t.text.clone(), (t.start, t.end)))
            }
            _ => Err(self.error_here("expected an identifier")),
        }
    }

    fn span_from(&self, start: usize) -> (usize, usize) {
        let end = if self.pos > 0 { self.toks[self.pos - 1].end } else { start };
        (start, end.max(start))
    }

    // ---- statements ----

    fn parse_statement(&mut self) -> PResult<Node> {
        let Some(first) = self.peek() else {
            return Err(self.error_here("expected a statement"));
        };
        let start = first.start;
        if first.kind != TokenKind::Keyword {
            return Err(self.error_here("expected a statement keyword"));
        }
        match first.text.as_str() {
            "SELECT" => self.parse_select(start),
            "INSERT" => self.parse_insert(start),
            "UPDATE" => self.parse_update(start),
            "DELETE" => self.parse_delete(start),
            "CREATE" => self.parse_create(start),
            "DROP" => self.parse_drop(start),
            "ALTER" => self.parse_alter(start),
            "CALL" => self.parse_call(start),
            other => Err(self.error_here(format!("`{other}` cannot start a statement"))),
        }
    }

    fn parse_select(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("SELECT")?;
        let list_start = self.peek().map(|t| t.start).unwrap_or(start);
        let list = if self.at_sym("*") {
            let t = self.bump().unwrap();
            let star = Node::leaf(NodeKind::Literal, "star", "*", (t.start, t.end));
            Node::inner(NodeKind::Clause, "select-list", vec![star], (t.start, t.end))
        } else {
            let mut items = vec![self.parse_expr()?];
            while self.eat_sym(",") {
                items.push(self.parse_expr()?);
            }
            Node::inner(NodeKind::Clause, "select-list", items, self.span_from(list_start))
        };
        let mut children = vec![list];
        if self.at_kw("FROM") {
            let f = self.parse_from()?;
            children.push(f);
        }
        if self.at_kw("WHERE") {
            children.push(self.parse_where()?);
        }
        if self.at_kw("ORDER") {
            children.push(self.parse_order_by()?);
        }
        if self.at_kw("LIMIT") {
            children.push(self.parse_limit()?);
        }
        Ok(Node::inner(NodeKind::Statement, "select", children, self.span_from(start)))
    }

    fn parse_from(&mut self) -> PResult<Node> {
        let t = self.expect_kw("FROM")?;
        let table = self.expect_ident()?;
        Ok(Node::inner(NodeKind::Clause, "from", vec![table], self.span_from(t.start)))
    }

    fn parse_where(&mut self) -> PResult<Node> {
        let t = self.expect_kw("WHERE")?;
        let cond = self.parse_expr()?;
        Ok(Node::inner(NodeKind::Clause, "where", vec![cond], self.span_from(t.start)))
    }

    fn parse_order_by(&mut self) -> PResult<Node> {
        let t = self.expect_kw("ORDER")?;
        self.expect_kw("BY")?;
        let mut keys = vec![self.parse_order_key()?];
        while self.eat_sym(",") {
            keys.push(self.parse_order_key()?);
        }
        Ok(Node::inner(NodeKind::Clause, "order-by", keys, self.span_from(t.start)))
    }

    fn parse_order_key(&mut self) -> PResult<Node> {
        let start = self.peek().map(|t| t.start).unwrap_or(self.src.len());
        let expr = self.parse_expr()?;
        let dir = if self.eat_kw("ASC") {
            "ASC"
        } else if self.eat_kw("DESC") {
            "DESC"
        } else {
            ""
        };
        let mut node = Node::inner(NodeKind::Clause, "order-key", vec![expr], self.span_from(start));
        node.text = dir.to_string();
        Ok(node)
    }

    fn parse_limit(&mut self) -> PResult<Node> {
        let t = self.expect_kw("LIMIT")?;
        let n = match self.peek() {
            Some(n) if n.kind == TokenKind::Number => {
                let n = self.bump().unwrap();
                Node::leaf(NodeKind::Literal, "number", n.text.clone(), (n.start, n.end))
            }
            _ => return Err(self.error_here("expected a row count")),
        };
        Ok(Node::inner(NodeKind::Clause, "limit", vec![n], self.span_from(t.start)))
    }

    fn parse_insert(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("INSERT")?;
        self.expect_kw("INTO")?;
        let table = self.expect_ident()?;
        let mut children = vec![table];
        if self.at_sym("(") {
            let c = self.peek().unwrap().start;
            self.bump();
            let mut cols = vec![self.expect_ident()?];
            while self.eat_sym(",") {
                cols.push(self.expect_ident()?);
            }
            self.expect_sym(")")?;
            children.push(Node::inner(NodeKind::Clause, "columns", cols, self.span_from(c)));
        }
        let v = self.expect_kw("VALUES")?;
        self.expect_sym("(")?;
        let mut vals = vec![self.parse_expr()?];
        while self.eat_sym(",") {
            vals.push(self.parse_expr()?);
        }
        self.expect_sym(")")?;
        children.push(Node::inner(NodeKind::Clause, "values", vals, self.span_from(v.start)));
        Ok(Node::inner(NodeKind::Statement, "insert", children, self.span_from(start)))
    }

    fn parse_update(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("UPDATE")?;
        let table = self.expect_ident()?;
        let s = self.expect_kw("SET")?;
        let mut assigns = vec![self.parse_assign()?];
        while self.eat_sym(",") {
            assigns.push(self.parse_assign()?);
        }
        let set = Node::inner(NodeKind::Clause, "set", assigns, self.span_from(s.start));
        let mut children = vec![table, set];
        if self.at_kw("WHERE") {
            children.push(self.parse_where()?);
        }
        Ok(Node::inner(NodeKind::Statement, "update", children, self.span_from(start)))
    }

    fn parse_assign(&mut self) -> PResult<Node> {
        let col = self.expect_ident()?;
        let start = col.span.0;
        self.expect_sym("=")?;
        let value = self.parse_expr()?;
        Ok(Node::inner(NodeKind::Clause, "assign", vec![col, value], self.span_from(start)))
    }

    fn parse_delete(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("DELETE")?;
        self.expect_kw("FROM")?;
        let table = self.expect_ident()?;
        let mut children = vec![table];
        if self.at_kw("WHERE") {
            children.push(self.parse_where()?);
        }
        Ok(Node::inner(NodeKind::Statement, "delete", children, self.span_from(start)))
    }

    fn parse_type(&mut self) -> PResult<Node> {
        for ty in ["INT", "TEXT"] {
            if self.at_kw(ty) {
                let t = self.bump().unwrap();
                return Ok(Node::leaf(NodeKind::Keyword, "keyword", ty, (t.start, t.end)));
            }
        }
        Err(self.error_here("expected a column type (INT or TEXT)"))
    }

    fn parse_column_def(&mut self) -> PResult<Node> {
        let name = self.expect_ident()?;
        let start = name.span.0;
        let ty = self.parse_type()?;
        Ok(Node::inner(NodeKind::Clause, "column-def", vec![name, ty], self.span_from(start)))
    }

    fn parse_create(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("CREATE")?;
        self.expect_kw("TABLE")?;
        let table = self.expect_ident()?;
        let d = self.expect_sym("(")?;
        let mut defs = vec![self.parse_column_def()?];
        while self.eat_sym(",") {
            defs.push(self.parse_column_def()?);
        }
        self.expect_sym(")")?;
        let defs = Node::inner(NodeKind::Clause, "column-defs", defs, self.span_from(d.start));
        Ok(Node::inner(NodeKind::Statement, "create-table", vec![table, defs], self.span_from(start)))
    }

    fn parse_drop(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("DROP")?;
        self.expect_kw("TABLE")?;
        let table = self.expect_ident()?;
        Ok(Node::inner(NodeKind::Statement, "drop-table", vec![table], self.span_from(start)))
    }

    fn parse_alter(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("ALTER")?;
        self.expect_kw("TABLE")?;
        let table = self.expect_ident()?;
        let action = if self.at_kw("ADD") {
            let a = self.bump().unwrap();
            self.expect_kw("COLUMN")?;
            let def = self.parse_column_def()?;
            Node::inner(NodeKind::Clause, "add-column", vec![def], self.span_from(a.start))
        } else if self.at_kw("DROP") {
            let a = self.bump().unwrap();
            self.expect_kw("COLUMN")?;
            let col = self.expect_ident()?;
            Node::inner(NodeKind::Clause, "drop-column", vec![col], self.span_from(a.start))
        } else if self.at_kw("RENAME") {
            let a = self.bump().unwrap();
            self.expect_kw("TO")?;
            let name = self.expect_ident()?;
            Node::inner(NodeKind::Clause, "rename-to", vec![name], self.span_from(a.start))
        } else {
            return Err(self.error_here("expected ADD COLUMN, DROP COLUMN or RENAME TO"));
        };
        Ok(Node::inner(NodeKind::Statement, "alter-table", vec![table, action], self.span_from(start)))
    }

    fn parse_call(&mut self, start: usize) -> PResult<Node> {
        self.expect_kw("CALL")?;
        let name = self.expect_ident()?;
        let a = self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.at_sym(")") {
            args.push(self.parse_expr()?);
            while self.eat_sym(",") {
                args.push(self.parse_expr()?);
            }
        }
        self.expect_sym(")")?;
        let args = Node::inner(NodeKind::Clause, "args", args, self.span_from(a.start));
        Ok(Node::inner(NodeKind::Statement, "call", vec![name, args], self.span_from(start)))
    }

    // ---- expressions ----

    fn parse_expr(&mut self) -> PResult<Node> {
        self.parse_or()
    }

    fn binary(&self, op: &Token, l: Node, r: Node) -> Node {
        let span = (l.span.0.min(op.start), r.span.1.max(op.end));
        let mut n = Node::inner(NodeKind::Expression, "binary", vec![l, r], span);
        n.text = op.text.clone();
        n
    }

    fn parse_or(&mut self) -> PResult<Node> {
        let mut l = self.parse_and()?;
        while self.at_kw("OR") {
            let op = self.bump().unwrap();
            let r = self.parse_and()?;
            l = self.binary(op, l, r);
        }
        Ok(l)
    }

    fn parse_and(&mut self) -> PResult<Node> {
        let mut l = self.parse_cmp()?;
        while self.at_kw("AND") {
            let op = self.bump().unwrap();
            let r = self.parse_cmp()?;
            l = self.binary(op, l, r);
        }
        Ok(l)
    }

    fn parse_cmp(&mut self) -> PResult<Node> {
        let l = self.parse_add()?;
        for op in ["<=", ">=", "<>", "!=", "=", "<", ">"] {
            if self.at_sym(op) {
                let op = self.bump().unwrap();
                let r = self.parse_add()?;
                return Ok(self.binary(op, l, r));
            }
        }
        Ok(l)
    }

    fn parse_add(&mut self) -> PResult<Node> {
        let mut l = self.parse_mul()?;
        loop {
            let op = if self.at_sym("+") {
                "+"
            } else if self.at_sym("-") {
                "-"
            } else {
                break;
            };
            let _ = op;
            let op = self.bump().unwrap();
            let r = self.parse_mul()?;
            l = self.binary(op, l, r);
        }
        Ok(l)
    }

    fn parse_mul(&mut self) -> PResult<Node> {
        let mut l = self.parse_unary()?;
        loop {
            let op = if self.at_sym("*") {
                "*"
            } else if self.at_sym("/") {
                "/"
            } else if self.at_sym("%") {
                "%"
            } else {
                break;
            };
            let _ = op;
            let op = self.bump().unwrap();
            let r = self.parse_unary()?;
            l = self.binary(op, l, r);
        }
        Ok(l)
    }

    fn parse_unary(&mut self) -> PResult<Node> {
        if self.at_kw("NOT") || self.at_sym("-") {
            let op = self.bump().unwrap();
            let inner = self.parse_unary()?;
            let span = (op.start, inner.span.1.max(op.end));
            let mut n = Node::inner(NodeKind::Expression, "unary", vec![inner], span);
            n.text = op.text.clone();
            return Ok(n);
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> PResult<Node> {
        let Some(t) = self.peek() else {
            return Err(self.error_here("expected an expression"));
        };
        match t.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Node::leaf(NodeKind::Literal, "number", t.text.clone(), (t.start, t.end)))
            }
            TokenKind::Str => {
                self.pos += 1;
                Ok(Node::leaf(NodeKind::Literal, "string", t.text.clone(), (t.start, t.end)))
            }
            TokenKind::Ident => {
                self.pos += 1;
                let ident = Node::leaf(NodeKind::Identifier, "ident", t.text.clone(), (t.start, t.end));
                if self.at_sym("(") {
                    let a = self.bump().unwrap();
                    let mut args = Vec::new();
                    if !self.at_sym(")") {
                        args.push(self.parse_expr()?);
                        while self.eat_sym(",") {
                            args.push(self.parse_expr()?);
                        }
                    }
                    self.expect_sym(")")?;
                    let args = Node::inner(NodeKind::Clause, "args", args, self.span_from(a.start));
                    let span = (ident.span.0, self.toks[self.pos - 1].end);
                    return Ok(Node::inner(NodeKind::Expression, "func", vec![ident, args], span));
                }
                Ok(ident)
            }
            TokenKind::Symbol if t.text == "(" => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                let close = self.expect_sym(")")?;
                Ok(Node::inner(NodeKind::Expression, "paren", vec![inner], (t.start, close.end)))
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }
}

/// Parse a whole script, demanding every statement conform to the grammar.
pub fn parse_strict(src: &str) -> Result<Node, SqlError> {
    let toks = tokenize(src);
    let mut p = Parser::new(src, &toks);
    let mut statements = Vec::new();
    while p.eat_sym(";") {}
    while !p.at_end() {
        statements.push(p.parse_statement()?);
        if !p.at_end() && !p.at_sym(";") {
            return Err(p.error_here("expected `;` or end of input"));
        }
        while p.eat_sym(";") {}
    }
    if statements.is_empty() {
        let (line, col) = line_col(src, 0);
        return Err(SqlError::Parse { offset: 0, line, col, msg: "no statement found".into() });
    }
    Ok(Node::inner(NodeKind::Statement, "script", statements, (0, src.len())))
}

/// Result of a recovering parse: everything salvageable plus diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredParse {
    pub fragments: Vec<Fragment>,
    pub diagnostics: Vec<SqlError>,
}

/// Clause kinds harvested from inside statements.
fn clause_kind(label: &str) -> Option<FragmentKind> {
    match label {
        "where" => Some(FragmentKind::Where),
        "order-by" => Some(FragmentKind::OrderBy),
        "limit" => Some(FragmentKind::Limit),
        _ => None,
    }
}

fn fragments_of_statement(stmt: &Node) -> Vec<Fragment> {
    let mut out = vec![Fragment::new(FragmentKind::Statement, stmt.clone())];
    stmt.walk(&mut |n| {
        if let Some(kind) = clause_kind(n.label) {
            out.push(Fragment::new(kind, n.clone()));
        }
    });
    out
}

/// Parse salvaging as much as possible. Statements that parse completely
/// are harvested whole (plus their WHERE / ORDER BY / LIMIT clauses); from
/// broken statements any clause that parses on its own is still taken.
pub fn parse_recovering(src: &str) -> RecoveredParse {
    let toks = tokenize(src);
    let mut fragments = Vec::new();
    let mut diagnostics = Vec::new();

    let mut slices: Vec<&[Token]> = Vec::new();
    let mut begin = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokenKind::Symbol && t.text == ";" {
            slices.push(&toks[begin..i]);
            begin = i + 1;
        }
    }
    slices.push(&toks[begin..]);

    for slice in slices {
        if slice.is_empty() {
            continue;
        }
        let mut p = Parser::new(src, slice);
        match p.parse_statement() {
            Ok(stmt) if p.at_end() => {
                fragments.extend(fragments_of_statement(&stmt));
                continue;
            }
            Ok(_) => {
                diagnostics.push(p.error_here("trailing input after statement"));
            }
            Err(e) => diagnostics.push(e),
        }
        // clause-level salvage inside the broken statement
        let mut i = 0;
        while i < slice.len() {
            let t = &slice[i];
            let is_kw = |s: &str| t.kind == TokenKind::Keyword && t.text == s;
            if is_kw("WHERE") {
                let mut q = Parser::new(src, slice);
                q.pos = i;
                if let Ok(clause) = q.parse_where() {
                    fragments.push(Fragment::new(FragmentKind::Where, clause));
                    i = q.pos;
                    continue;
                }
            } else if is_kw("ORDER") {
                let mut q = Parser::new(src, slice);
                q.pos = i;
                if let Ok(clause) = q.parse_order_by() {
                    fragments.push(Fragment::new(FragmentKind::OrderBy, clause));
                    i = q.pos;
                    continue;
                }
            } else if is_kw("LIMIT") {
                let mut q = Parser::new(src, slice);
                q.pos = i;
                if let Ok(clause) = q.parse_limit() {
                    fragments.push(Fragment::new(FragmentKind::Limit, clause));
                    i = q.pos;
                    continue;
                }
            }
            i += 1;
        }
    }
    RecoveredParse { fragments, diagnostics }
}

/// Parse `text` under a fragment's own nonterminal. Used to check pool
/// soundness: every harvested fragment must reparse this way.
pub fn parse_fragment(text: &str, kind: FragmentKind) -> Result<Node, SqlError> {
    let toks = tokenize(text);
    let mut p = Parser::new(text, &toks);
    let node = match kind {
        FragmentKind::Statement => p.parse_statement()?,
        FragmentKind::Where => p.parse_where()?,
        FragmentKind::OrderBy => p.parse_order_by()?,
        FragmentKind::Limit => p.parse_limit()?,
    };
    if !p.at_end() {
        return Err(p.error_here("trailing input after fragment"));
    }
    Ok(node)
}
