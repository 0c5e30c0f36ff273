//! AST to text. The serializer is total over every tree the parser or the
//! mutators can produce: unknown labels fall back to emitting children
//! space-separated rather than panicking.

use crate::ast::Node;
use crate::lex::quote_string;

fn join(children: &[Node], sep: &str) -> String {
    children.iter().map(serialize).collect::<Vec<_>>().join(sep)
}

/// Serialize any node. Statements come out without a trailing semicolon;
/// a `script` node joins its statements with `"; "`.
pub fn serialize(node: &Node) -> String {
    match node.label {
        "script" => join(&node.children, "; "),
        "select" => {
            let mut out = String::from("SELECT");
            for c in &node.children {
                out.push(' ');
                out.push_str(&serialize(c));
            }
            out
        }
        "select-list" => join(&node.children, ", "),
        "from" => format!("FROM {}", join(&node.children, " ")),
        "where" => format!("WHERE {}", join(&node.children, " ")),
        "order-by" => format!("ORDER BY {}", join(&node.children, ", ")),
        "order-key" => {
            let expr = join(&node.children, " ");
            if node.text.is_empty() {
                expr
            } else {
                format!("{expr} {}", node.text)
            }
        }
        "limit" => format!("LIMIT {}", join(&node.children, " ")),
        "insert" => {
            let mut out = format!("INSERT INTO {}", serialize(&node.children[0]));
            for c in &node.children[1..] {
                out.push(' ');
                out.push_str(&serialize(c));
            }
            out
        }
        "columns" => format!("({})", join(&node.children, ", ")),
        "values" => format!("VALUES ({})", join(&node.children, ", ")),
        "update" => {
            let mut out = format!("UPDATE {}", serialize(&node.children[0]));
            for c in &node.children[1..] {
                out.push(' ');
                out.push_str(&serialize(c));
            }
            out
        }
        "set" => format!("SET {}", join(&node.children, ", ")),
        "assign" => format!("{} = {}", serialize(&node.children[0]), serialize(&node.children[1])),
        "delete" => {
            let mut out = format!("DELETE FROM {}", serialize(&node.children[0]));
            for c in &node.children[1..] {
                out.push(' ');
                out.push_str(&serialize(c));
            }
            out
        }
        "create-table" => format!(
            "CREATE TABLE {} {}",
            serialize(&node.children[0]),
            serialize(&node.children[1])
        ),
        "column-defs" => format!("({})", join(&node.children, ", ")),
        "column-def" => join(&node.children, " "),
        "drop-table" => format!("DROP TABLE {}", join(&node.children, " ")),
        "alter-table" => format!(
            "ALTER TABLE {} {}",
            serialize(&node.children[0]),
            serialize(&node.children[1])
        ),
        "add-column" => format!("ADD COLUMN {}", join(&node.children, " ")),
        "drop-column" => format!("DROP COLUMN {}", join(&node.children, " ")),
        "rename-to" => format!("RENAME TO {}", join(&node.children, " ")),
        "call" => format!("CALL {}{}", serialize(&node.children[0]), serialize(&node.children[1])),
        "args" => format!("({})", join(&node.children, ", ")),
        "binary" => format!(
            "{} {} {}",
            serialize(&node.children[0]),
            node.text,
            serialize(&node.children[1])
        ),
        "unary" => {
            if node.text == "NOT" {
                format!("NOT {}", serialize(&node.children[0]))
            } else {
                // adjacent minus signs would lex as a line comment
                let inner = serialize(&node.children[0]);
                if inner.starts_with('-') {
                    format!("{} {inner}", node.text)
                } else {
                    format!("{}{inner}", node.text)
                }
            }
        }
        "paren" => format!("({})", serialize(&node.children[0])),
        "func" => format!("{}{}", serialize(&node.children[0]), serialize(&node.children[1])),
        "ident" | "number" | "keyword" => node.text.clone(),
        "string" => quote_string(&node.text),
        "star" => "*".to_string(),
        _ => join(&node.children, " "),
    }
}
