//! Statement execution against the in-memory catalog. Every executor is
//! instrumented per decision outcome; results come back as plain text for
//! an R frame, errors as messages for an E frame.

use sqlgen::{parse_strict, Node};

use crate::catalog::{Database, Table};
use crate::eval::{eval, truthy, RowCtx};
use crate::instr::{hit_block, STORAGE};
use crate::sentinel::{self, FaultKind};
use crate::value::{ColType, Value};

/// Replies larger than this become errors instead of oversized frames.
pub const RESULT_CAP: usize = 256 * 1024;

fn b(function: &'static str, block: &'static str) {
    hit_block(STORAGE, function, block);
}

pub fn execute(db: &mut Database, sql: &str) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_execute");
    b("st_execute", "entry");
    let script = match parse_strict(sql) {
        Ok(s) => s,
        Err(e) => {
            b("st_execute", "parse_err");
            b("st_execute", "rw_chk");
            b("st_execute", "rw_err");
            return Err(format!("parse error: {e}"));
        }
    };
    // The planner forwards one statement per frame; tolerate extras by
    // taking the first.
    let stmt = match script.children.first() {
        Some(s) => s,
        None => {
            b("st_execute", "parse_err");
            b("st_execute", "rw_chk");
            b("st_execute", "rw_err");
            return Err("empty statement".into());
        }
    };
    let result = match stmt.label {
        "select" => {
            b("st_execute", "k_select");
            exec_select(db, stmt)
        }
        "insert" => {
            b("st_execute", "k_insert");
            exec_insert(db, stmt)
        }
        "update" => {
            b("st_execute", "k_update");
            exec_update(db, stmt)
        }
        "delete" => {
            b("st_execute", "k_delete");
            exec_delete(db, stmt)
        }
        "create-table" => {
            b("st_execute", "k_create");
            exec_create(db, stmt)
        }
        "drop-table" => {
            b("st_execute", "k_drop");
            exec_drop(db, stmt)
        }
        "alter-table" => {
            b("st_execute", "k_alter");
            exec_alter(db, stmt)
        }
        "call" => {
            b("st_execute", "k_call");
            exec_call(db, stmt)
        }
        other => Err(format!("unsupported statement: {other}")),
    };
    b("st_execute", "rw_chk");
    match &result {
        Ok(text) if text.len() > RESULT_CAP => {
            b("st_execute", "rw_big");
            Err("result too large".into())
        }
        Ok(_) => {
            b("st_execute", "rw_ok");
            result
        }
        Err(_) => {
            b("st_execute", "rw_err");
            result
        }
    }
}

fn child<'a>(stmt: &'a Node, label: &str) -> Option<&'a Node> {
    stmt.children.iter().find(|c| c.label == label)
}

fn table_name(stmt: &Node) -> &str {
    &stmt.children[0].text
}

fn exec_create(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_create");
    b("st_create", "entry");
    let name = table_name(stmt);
    if db.tables.contains_key(name) {
        b("st_create", "c_exists");
        return Err(format!("table already exists: {name}"));
    }
    b("st_create", "c_fresh");
    let defs = child(stmt, "column-defs").ok_or("missing column list")?;
    let mut columns: Vec<(String, ColType)> = Vec::new();
    for def in &defs.children {
        let col = def.children[0].text.clone();
        let ty = ColType::from_keyword(&def.children[1].text)
            .ok_or_else(|| format!("unknown column type: {}", def.children[1].text))?;
        if columns.iter().any(|(n, _)| *n == col) {
            b("st_create", "c_dupcol");
            return Err(format!("duplicate column: {col}"));
        }
        columns.push((col, ty));
    }
    b("st_create", "c_apply");
    db.tables.insert(name.to_string(), Table { columns, rows: Vec::new() });
    metrics(db, name);
    Ok("ok".into())
}

fn exec_drop(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_drop");
    b("st_drop", "entry");
    let name = table_name(stmt);
    if db.tables.remove(name).is_none() {
        b("st_drop", "d_missing");
        return Err(format!("no such table: {name}"));
    }
    b("st_drop", "d_apply");
    Ok("ok".into())
}

fn exec_alter(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_alter");
    b("st_alter", "entry");
    let name = table_name(stmt).to_string();
    if !db.tables.contains_key(&name) {
        b("st_alter", "a_missing");
        return Err(format!("no such table: {name}"));
    }
    b("st_alter", "a_found");
    let action = &stmt.children[1];
    match action.label {
        "add-column" => {
            b("st_alter", "a_add");
            let def = &action.children[0];
            let col = def.children[0].text.clone();
            let ty = ColType::from_keyword(&def.children[1].text)
                .ok_or_else(|| format!("unknown column type: {}", def.children[1].text))?;
            let table = db.tables.get_mut(&name).unwrap();
            if table.column_index(&col).is_some() {
                b("st_alter", "aa_dup");
                return Err(format!("duplicate column: {col}"));
            }
            b("st_alter", "aa_guard");
            if ty == ColType::Text && table.columns.len() >= 2 && table.rows.len() >= 2 {
                b("st_alter", "s1_fire");
                sentinel::crash(
                    STORAGE,
                    FaultKind::Segv,
                    "row rewrite overflow while widening populated table",
                );
            }
            b("st_alter", "aa_apply");
            table.columns.push((col, ty));
            for row in &mut table.rows {
                row.push(Value::default_for(ty));
            }
            metrics(db, &name);
            Ok("ok".into())
        }
        "drop-column" => {
            b("st_alter", "a_drop");
            let col = &action.children[0].text;
            let table = db.tables.get_mut(&name).unwrap();
            let idx = match table.column_index(col) {
                Some(i) => i,
                None => {
                    b("st_alter", "ad_missing");
                    return Err(format!("no such column: {col}"));
                }
            };
            if table.columns.len() == 1 {
                b("st_alter", "ad_last");
                return Err("cannot drop the last column".into());
            }
            b("st_alter", "ad_apply");
            table.columns.remove(idx);
            for row in &mut table.rows {
                row.remove(idx);
            }
            metrics(db, &name);
            Ok("ok".into())
        }
        "rename-to" => {
            b("st_alter", "a_ren");
            let target = action.children[0].text.clone();
            if db.tables.contains_key(&target) && target != name {
                b("st_alter", "ar_exists");
                return Err(format!("table already exists: {target}"));
            }
            b("st_alter", "ar_apply");
            let table = db.tables.remove(&name).unwrap();
            db.tables.insert(target.clone(), table);
            metrics(db, &target);
            Ok("ok".into())
        }
        other => Err(format!("unsupported alter action: {other}")),
    }
}

fn exec_insert(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_insert");
    b("st_insert", "entry");
    let name = table_name(stmt).to_string();
    if !db.tables.contains_key(&name) {
        b("st_insert", "i_missing");
        return Err(format!("no such table: {name}"));
    }
    b("st_insert", "i_found");
    let (targets, table_cols) = {
        let table = &db.tables[&name];
        let all: Vec<usize> = (0..table.columns.len()).collect();
        let targets = match child(stmt, "columns") {
            Some(cols) => {
                b("st_insert", "i_named");
                let mut idx = Vec::new();
                for c in &cols.children {
                    match table.column_index(&c.text) {
                        Some(i) => idx.push(i),
                        None => {
                            b("st_insert", "i_badcol");
                            return Err(format!("no such column: {}", c.text));
                        }
                    }
                }
                b("st_insert", "i_named_ok");
                idx
            }
            None => {
                b("st_insert", "i_bare");
                all
            }
        };
        (targets, table.columns.clone())
    };
    let values = child(stmt, "values").ok_or("missing values")?;
    b("st_insert", "i_arity_chk");
    if values.children.len() != targets.len() {
        b("st_insert", "i_arity_err");
        return Err(format!(
            "expected {} values, got {}",
            targets.len(),
            values.children.len()
        ));
    }
    b("st_insert", "i_vals");
    let mut row: Vec<Value> = table_cols.iter().map(|(_, t)| Value::default_for(*t)).collect();
    for (expr, &slot) in values.children.iter().zip(&targets) {
        let v = match eval(expr, None) {
            Ok(v) => v,
            Err(e) => {
                b("st_insert", "i_eval_err");
                return Err(e);
            }
        };
        if v.col_type() != table_cols[slot].1 {
            b("st_insert", "i_type_err");
            return Err(format!(
                "type mismatch for column {}: expected {}",
                table_cols[slot].0,
                table_cols[slot].1.name()
            ));
        }
        row[slot] = v;
    }
    b("st_insert", "i_apply");
    db.tables.get_mut(&name).unwrap().rows.push(row);
    metrics(db, &name);
    Ok("inserted 1".into())
}

fn render(rows: &[Vec<Value>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

fn exec_select(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_select");
    b("st_select", "entry");
    let list = &stmt.children[0];
    let is_star = list.children.len() == 1 && list.children[0].label == "star";

    let from = child(stmt, "from");
    if from.is_none() {
        b("st_select", "s_nofrom");
        if is_star {
            b("st_select", "snf_err");
            return Err("* requires a FROM clause".into());
        }
        let mut row = Vec::new();
        for expr in &list.children {
            match eval(expr, None) {
                Ok(v) => row.push(v),
                Err(e) => {
                    b("st_select", "snf_err");
                    return Err(e);
                }
            }
        }
        b("st_select", "snf_ok");
        return Ok(render(&[row]));
    }
    b("st_select", "s_from");
    let name = &from.unwrap().children[0].text;
    let table = match db.tables.get(name) {
        Some(t) => t,
        None => {
            b("st_select", "sf_missing");
            return Err(format!("no such table: {name}"));
        }
    };
    b("st_select", "sf_found");

    b("st_select", "flt_chk");
    let mut kept: Vec<Vec<Value>> = Vec::new();
    match child(stmt, "where") {
        Some(w) => {
            for row in &table.rows {
                let ctx = RowCtx { table, row };
                match eval(&w.children[0], Some(&ctx)) {
                    Ok(v) => {
                        if truthy(&v) {
                            kept.push(row.clone());
                        }
                    }
                    Err(e) => {
                        b("st_select", "flt_err");
                        return Err(e);
                    }
                }
            }
        }
        None => kept = table.rows.clone(),
    }
    b("st_select", "flt_ok");

    b("st_select", "ord_chk");
    match child(stmt, "order-by") {
        None => b("st_select", "ord_none"),
        Some(ob) => {
            // Decorate with key vectors, then stable sort.
            let mut decorated: Vec<(Vec<(Value, bool)>, Vec<Value>)> = Vec::new();
            for row in kept {
                let ctx = RowCtx { table, row: &row };
                let mut keys = Vec::new();
                for k in &ob.children {
                    let desc = k.text == "DESC";
                    match eval(&k.children[0], Some(&ctx)) {
                        Ok(v) => keys.push((v, desc)),
                        Err(e) => {
                            b("st_select", "ord_err");
                            return Err(e);
                        }
                    }
                }
                decorated.push((keys, row));
            }
            decorated.sort_by(|a, b| {
                for ((ka, desc), (kb, _)) in a.0.iter().zip(&b.0) {
                    let ord = ka.sort_cmp(kb);
                    let ord = if *desc { ord.reverse() } else { ord };
                    if !ord.is_eq() {
                        return ord;
                    }
                }
                std::cmp::Ordering::Equal
            });
            kept = decorated.into_iter().map(|(_, r)| r).collect();
            b("st_select", "ord_ok");
        }
    }

    b("st_select", "lim_chk");
    match child(stmt, "limit") {
        None => b("st_select", "lim_none"),
        Some(l) => match l.children[0].text.parse::<i64>() {
            Err(_) => {
                b("st_select", "lim_err");
                return Err("limit out of range".into());
            }
            Ok(n) => {
                if n == 0 {
                    b("st_select", "lim_zero");
                } else if n <= 16 {
                    b("st_select", "lim_small");
                } else {
                    b("st_select", "lim_large");
                }
                kept.truncate(n as usize);
            }
        },
    }

    b("st_select", "prj_chk");
    let mut out: Vec<Vec<Value>> = Vec::new();
    for row in &kept {
        if is_star {
            out.push(row.clone());
            continue;
        }
        let ctx = RowCtx { table, row };
        let mut proj = Vec::new();
        for expr in &list.children {
            match eval(expr, Some(&ctx)) {
                Ok(v) => proj.push(v),
                Err(e) => {
                    b("st_select", "prj_err");
                    return Err(e);
                }
            }
        }
        out.push(proj);
    }
    b("st_select", "prj_ok");

    b("st_select", "s_emit");
    Ok(render(&out))
}

fn exec_update(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_update");
    b("st_update", "entry");
    let name = table_name(stmt).to_string();
    if !db.tables.contains_key(&name) {
        b("st_update", "u_missing");
        return Err(format!("no such table: {name}"));
    }
    b("st_update", "u_found");
    let set = child(stmt, "set").ok_or("missing SET clause")?;
    let table = &db.tables[&name];
    let mut targets: Vec<(usize, &Node)> = Vec::new();
    for assign in &set.children {
        let col = &assign.children[0].text;
        match table.column_index(col) {
            Some(i) => targets.push((i, &assign.children[1])),
            None => {
                b("st_update", "u_badcol");
                return Err(format!("no such column: {col}"));
            }
        }
    }
    b("st_update", "u_cols_ok");
    let cond = child(stmt, "where").map(|w| &w.children[0]);
    // Two phases: compute every replacement row, then commit, so an error
    // midway never leaves the table half updated.
    let mut updates: Vec<(usize, Vec<Value>)> = Vec::new();
    for (ri, row) in table.rows.iter().enumerate() {
        let ctx = RowCtx { table, row };
        let hit = match cond {
            Some(c) => match eval(c, Some(&ctx)) {
                Ok(v) => truthy(&v),
                Err(e) => {
                    b("st_update", "uw_err");
                    return Err(e);
                }
            },
            None => true,
        };
        if !hit {
            continue;
        }
        let mut next = row.clone();
        for (slot, expr) in &targets {
            let v = match eval(expr, Some(&ctx)) {
                Ok(v) => v,
                Err(e) => {
                    b("st_update", "u_eval_err");
                    return Err(e);
                }
            };
            if v.col_type() != table.columns[*slot].1 {
                b("st_update", "u_type_err");
                return Err(format!(
                    "type mismatch for column {}: expected {}",
                    table.columns[*slot].0,
                    table.columns[*slot].1.name()
                ));
            }
            next[*slot] = v;
        }
        updates.push((ri, next));
    }
    b("st_update", "uw_ok");
    b("st_update", "u_apply");
    let n = updates.len();
    let table = db.tables.get_mut(&name).unwrap();
    for (ri, next) in updates {
        table.rows[ri] = next;
    }
    metrics(db, &name);
    Ok(format!("updated {n}"))
}

fn exec_delete(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _f = sentinel::frame("toydb-storage!st_delete");
    b("st_delete", "entry");
    let name = table_name(stmt).to_string();
    if !db.tables.contains_key(&name) {
        b("st_delete", "del_missing");
        return Err(format!("no such table: {name}"));
    }
    b("st_delete", "del_found");
    match child(stmt, "where") {
        None => {
            b("st_delete", "dw_absent");
            b("st_delete", "d_clear");
            let table = db.tables.get_mut(&name).unwrap();
            let n = table.rows.len();
            table.rows.clear();
            metrics(db, &name);
            Ok(format!("deleted {n}"))
        }
        Some(w) => {
            b("st_delete", "dw_present");
            let table = &db.tables[&name];
            let mut matched = vec![false; table.rows.len()];
            for (ri, row) in table.rows.iter().enumerate() {
                let ctx = RowCtx { table, row };
                match eval(&w.children[0], Some(&ctx)) {
                    Ok(v) => matched[ri] = truthy(&v),
                    Err(e) => {
                        b("st_delete", "dwp_err");
                        return Err(e);
                    }
                }
            }
            b("st_delete", "dwp_ok");
            let n = matched.iter().filter(|m| **m).count();
            b("st_delete", "s2_chk");
            if !table.rows.is_empty() && n == table.rows.len() {
                b("st_delete", "s2_fire");
                sentinel::crash(
                    STORAGE,
                    FaultKind::Abort,
                    "tombstone compaction emptied a live page",
                );
            }
            b("st_delete", "d_apply");
            let table = db.tables.get_mut(&name).unwrap();
            let mut keep = matched.iter();
            table.rows.retain(|_| !*keep.next().unwrap());
            metrics(db, &name);
            Ok(format!("deleted {n}"))
        }
    }
}

fn exec_call(db: &mut Database, stmt: &Node) -> Result<String, String> {
    let _ = db;
    let _f = sentinel::frame("toydb-storage!st_call");
    b("st_call", "entry");
    let name = &stmt.children[0].text;
    let args = &stmt.children[1];
    match name.as_str() {
        "toydb_version" => {
            b("st_call", "cl_version");
            Ok("toydb 0.1".into())
        }
        "toydb_sleep" => {
            b("st_call", "cl_sleep");
            let ms = match args.children.first().map(|a| eval(a, None)) {
                Some(Ok(Value::Int(n))) if n >= 0 => n as u64,
                _ => {
                    b("st_call", "cs_badarg");
                    return Err("toydb_sleep expects a non-negative integer".into());
                }
            };
            b("st_call", "cs_run");
            std::thread::sleep(std::time::Duration::from_millis(ms.min(600_000)));
            // Deliberately after the sleep: a timeout kill leaves it unhit.
            b("st_call", "cs_done");
            Ok("slept".into())
        }
        other => {
            b("st_call", "cl_unknown");
            Err(format!("unknown procedure: {other}"))
        }
    }
}

/// Shape milestones after a successful mutating statement: bucket counts
/// for tables, focal-table columns and rows. First crossings mint new
/// coverage, repeats are free.
fn metrics(db: &Database, focal: &str) {
    b("st_metrics", "mt_chk");
    match db.tables.len() {
        1 => b("st_metrics", "mt1"),
        2 => b("st_metrics", "mt2"),
        _ => b("st_metrics", "mt3p"),
    }
    if let Some(table) = db.tables.get(focal) {
        b("st_metrics", "mc_chk");
        match table.columns.len() {
            1 => b("st_metrics", "mc1"),
            2 => b("st_metrics", "mc2"),
            3 => b("st_metrics", "mc3"),
            _ => b("st_metrics", "mc4p"),
        }
        b("st_metrics", "mr_chk");
        match table.rows.len() {
            0 => b("st_metrics", "mr0"),
            1 => b("st_metrics", "mr1"),
            2 | 3 => b("st_metrics", "mr2"),
            4..=7 => b("st_metrics", "mr4"),
            8..=15 => b("st_metrics", "mr8"),
            _ => b("st_metrics", "mr16p"),
        }
    }
    b("st_metrics", "m_done");
}
