//! In-memory catalog owned by the storage process: tables, columns, rows.

use std::collections::BTreeMap;

use crate::value::{ColType, Value};

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<(String, ColType)>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }
}

/// Whole-database state. BTreeMap keeps iteration deterministic.
#[derive(Debug, Clone, Default)]
pub struct Database {
    pub tables: BTreeMap<String, Table>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn clear(&mut self) {
        self.tables.clear();
    }
}
