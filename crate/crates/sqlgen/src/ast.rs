//! Generic syntax tree.
//!
//! Every node carries a coarse kind (what mutation may do with it), a
//! production label (how to serialize it), optional leaf or operator
//! text, children, and the source span it was parsed from. Nodes built by
//! mutation carry the zero span.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Statement,
    Clause,
    Expression,
    Identifier,
    Literal,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub label: &'static str,
    /// Leaf content, or the operator of a `binary`/`unary` expression, or
    /// the direction of an `order-key` ("", "ASC", "DESC").
    pub text: String,
    pub children: Vec<Node>,
    pub span: (usize, usize),
}

impl Node {
    pub fn leaf(kind: NodeKind, label: &'static str, text: impl Into<String>, span: (usize, usize)) -> Node {
        Node { kind, label, text: text.into(), children: Vec::new(), span }
    }

    pub fn inner(kind: NodeKind, label: &'static str, children: Vec<Node>, span: (usize, usize)) -> Node {
        Node { kind, label, text: String::new(), children, span }
    }

    pub fn child(&self, label: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.label == label)
    }

    pub fn child_position(&self, label: &str) -> Option<usize> {
        self.children.iter().position(|c| c.label == label)
    }

    /// Preorder walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// Tree equality that ignores source spans.
pub fn structural_eq(a: &Node, b: &Node) -> bool {
    a.kind == b.kind
        && a.label == b.label
        && a.text == b.text
        && a.children.len() == b.children.len()
        && a.children.iter().zip(&b.children).all(|(x, y)| structural_eq(x, y))
}
