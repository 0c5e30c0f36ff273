//! Expression evaluation over parsed SQL trees, instrumented block by
//! block. Arithmetic is wrapping on i64; comparisons across types use the
//! total sort order so predicates stay robust under mutated inputs.

use sqlgen::Node;

use crate::catalog::Table;
use crate::instr::{hit_block, STORAGE};
use crate::value::Value;

pub struct RowCtx<'a> {
    pub table: &'a Table,
    pub row: &'a [Value],
}

fn b(block: &'static str) {
    hit_block(STORAGE, "st_eval", block);
}

/// Truthiness with its own coverage: AND/OR/NOT route through here.
pub fn truthy(v: &Value) -> bool {
    hit_block(STORAGE, "st_truth", "entry");
    match v {
        Value::Int(n) => {
            hit_block(STORAGE, "st_truth", "t_int");
            *n != 0
        }
        Value::Text(s) => {
            hit_block(STORAGE, "st_truth", "t_text");
            !s.is_empty()
        }
    }
}

fn bool_val(t: bool) -> Value {
    Value::Int(i64::from(t))
}

/// Evaluate `node` against an optional row context. Errors are messages
/// destined for an E frame.
pub fn eval(node: &Node, ctx: Option<&RowCtx>) -> Result<Value, String> {
    b("entry");
    match node.label {
        "number" => match node.text.parse::<i64>() {
            Ok(n) => {
                b("num");
                Ok(Value::Int(n))
            }
            Err(_) => {
                b("num_overflow");
                Err(format!("integer literal out of range: {}", node.text))
            }
        },
        "string" => {
            b("str");
            Ok(Value::Text(node.text.clone()))
        }
        "ident" => match ctx {
            None => {
                b("ident_noctx");
                Err(format!("column reference not allowed here: {}", node.text))
            }
            Some(c) => match c.table.column_index(&node.text) {
                Some(i) => {
                    b("ident_ok");
                    Ok(c.row[i].clone())
                }
                None => {
                    b("ident_err");
                    Err(format!("no such column: {}", node.text))
                }
            },
        },
        "paren" => {
            b("paren");
            eval(&node.children[0], ctx)
        }
        "func" => {
            b("func_err");
            Err(format!("function not allowed in expressions: {}", node.children[0].text))
        }
        "unary" => {
            let inner = eval(&node.children[0], ctx)?;
            if node.text == "NOT" {
                b("not_eval");
                Ok(bool_val(!truthy(&inner)))
            } else {
                match inner {
                    Value::Int(n) => {
                        b("neg_ok");
                        Ok(Value::Int(n.wrapping_neg()))
                    }
                    Value::Text(_) => {
                        b("neg_err");
                        Err("cannot negate text".into())
                    }
                }
            }
        }
        "binary" => {
            let l = eval(&node.children[0], ctx)?;
            let r = eval(&node.children[1], ctx)?;
            match node.text.as_str() {
                "AND" => {
                    b("and_eval");
                    Ok(bool_val(truthy(&l) && truthy(&r)))
                }
                "OR" => {
                    b("or_eval");
                    Ok(bool_val(truthy(&l) || truthy(&r)))
                }
                "=" | "<>" | "!=" | "<" | "<=" | ">" | ">=" => {
                    match (&l, &r) {
                        (Value::Int(_), Value::Int(_)) => b("cmp_int"),
                        (Value::Text(_), Value::Text(_)) => b("cmp_text"),
                        _ => b("cmp_mixed"),
                    }
                    let ord = l.sort_cmp(&r);
                    let t = match node.text.as_str() {
                        "=" => ord.is_eq(),
                        "<>" | "!=" => ord.is_ne(),
                        "<" => ord.is_lt(),
                        "<=" => ord.is_le(),
                        ">" => ord.is_gt(),
                        _ => ord.is_ge(),
                    };
                    Ok(bool_val(t))
                }
                "+" | "-" | "*" | "/" | "%" => match (&l, &r) {
                    (Value::Int(a), Value::Int(c)) => match node.text.as_str() {
                        "+" => {
                            b("add");
                            Ok(Value::Int(a.wrapping_add(*c)))
                        }
                        "-" => {
                            b("sub");
                            Ok(Value::Int(a.wrapping_sub(*c)))
                        }
                        "*" => {
                            b("mul");
                            Ok(Value::Int(a.wrapping_mul(*c)))
                        }
                        "/" => {
                            if *c == 0 {
                                b("div_zero");
                                Err("division by zero".into())
                            } else {
                                b("div_ok");
                                Ok(Value::Int(a.wrapping_div(*c)))
                            }
                        }
                        _ => {
                            if *c == 0 {
                                b("mod_zero");
                                Err("division by zero".into())
                            } else {
                                b("mod_ok");
                                Ok(Value::Int(a.wrapping_rem(*c)))
                            }
                        }
                    },
                    _ => {
                        b("arith_type");
                        Err(format!("arithmetic needs integers: {}", node.text))
                    }
                },
                other => Err(format!("unsupported operator: {other}")),
            }
        }
        other => Err(format!("unsupported expression: {other}")),
    }
}
