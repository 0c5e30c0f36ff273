//! Cell values and column types. Two types keep the engine small while
//! still exercising type checking, coercion errors and mixed-type sorts.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColType {
    Int,
    Text,
}

impl ColType {
    pub fn name(self) -> &'static str {
        match self {
            ColType::Int => "INT",
            ColType::Text => "TEXT",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<ColType> {
        match kw {
            "INT" => Some(ColType::Int),
            "TEXT" => Some(ColType::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn col_type(&self) -> ColType {
        match self {
            Value::Int(_) => ColType::Int,
            Value::Text(_) => ColType::Text,
        }
    }

    pub fn default_for(ty: ColType) -> Value {
        match ty {
            ColType::Int => Value::Int(0),
            ColType::Text => Value::Text(String::new()),
        }
    }

    /// Truthiness: nonzero integer, nonempty text.
    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(n) => *n != 0,
            Value::Text(s) => !s.is_empty(),
        }
    }

    /// Total order used by ORDER BY: integers before text, then natural
    /// order inside each type. Total so sorting never fails.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Int(_), Value::Text(_)) => Ordering::Less,
            (Value::Text(_), Value::Int(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}
