//! Query-side statement planning: shape analysis for coverage, procedure
//! routing, and canonicalization. The WHERE skip edge in `qy_select` is
//! the one two-sided jump in the whole target; it exercises edge-level
//! instrumentation (a dummy counter minted at planning time).

use sqlgen::{serialize, Node};

use crate::instr::{hit_block, hit_edge, QUERY};
use crate::sentinel::{self, FaultKind};

pub enum Route {
    /// Canonical text to forward to storage.
    Forward(String),
    Cancel,
    Checkpoint,
    Reject(String),
}

fn b(function: &'static str, block: &'static str) {
    hit_block(QUERY, function, block);
}

fn child<'a>(stmt: &'a Node, label: &str) -> Option<&'a Node> {
    stmt.children.iter().find(|c| c.label == label)
}

/// Procedure registry: name -> arity. Anything else bounces at planning.
const PROCEDURES: &[(&str, usize)] = &[
    ("toydb_version", 0),
    ("toydb_sleep", 1),
    ("toydb_cancel", 0),
    ("toydb_checkpoint", 0),
];

pub fn plan_statement(stmt: &Node) -> Route {
    let _f = sentinel::frame("toydb-query!qy_plan");
    b("qy_plan", "entry");
    scan_exprs(stmt);
    match stmt.label {
        "select" => {
            b("qy_plan", "k_select");
            plan_select(stmt);
        }
        "insert" => {
            b("qy_plan", "k_insert");
            b("qy_plan", "ic_chk");
            if child(stmt, "columns").is_some() {
                b("qy_plan", "ic_named");
            } else {
                b("qy_plan", "ic_bare");
            }
            b("qy_plan", "iv_chk");
            let n = child(stmt, "values").map_or(0, |v| v.children.len());
            match n {
                0 | 1 => b("qy_plan", "iv1"),
                2 => b("qy_plan", "iv2"),
                _ => b("qy_plan", "iv3p"),
            }
            b("qy_plan", "ins_done");
        }
        "update" => {
            b("qy_plan", "k_update");
            b("qy_plan", "us_chk");
            let n = child(stmt, "set").map_or(0, |s| s.children.len());
            if n <= 1 {
                b("qy_plan", "us1");
            } else {
                b("qy_plan", "us2p");
            }
            b("qy_plan", "uw_chk");
            if child(stmt, "where").is_some() {
                b("qy_plan", "uw_yes");
            } else {
                b("qy_plan", "uw_no");
            }
            b("qy_plan", "upd_done");
        }
        "delete" => {
            b("qy_plan", "k_delete");
            b("qy_plan", "dl_chk");
            if child(stmt, "where").is_some() {
                b("qy_plan", "dl_where");
            } else {
                b("qy_plan", "dl_bare");
            }
            b("qy_plan", "del_done");
        }
        "create-table" => {
            b("qy_plan", "k_create");
            b("qy_plan", "cc_chk");
            let n = child(stmt, "column-defs").map_or(0, |d| d.children.len());
            match n {
                0 | 1 => b("qy_plan", "cc1"),
                2 => b("qy_plan", "cc2"),
                _ => b("qy_plan", "cc3p"),
            }
            b("qy_plan", "cre_done");
        }
        "drop-table" => {
            b("qy_plan", "k_drop");
        }
        "alter-table" => {
            b("qy_plan", "k_alter");
            b("qy_plan", "al_chk");
            match stmt.children[1].label {
                "add-column" => b("qy_plan", "al_add"),
                "drop-column" => b("qy_plan", "al_drop"),
                _ => b("qy_plan", "al_ren"),
            }
            b("qy_plan", "alt_done");
        }
        "call" => {
            b("qy_plan", "k_call");
            let name = stmt.children[0].text.as_str();
            let arity = stmt.children[1].children.len();
            b("qy_plan", "ca_chk");
            let expected = match name {
                "toydb_version" => {
                    b("qy_plan", "ca_version");
                    PROCEDURES[0].1
                }
                "toydb_sleep" => {
                    b("qy_plan", "ca_sleep");
                    PROCEDURES[1].1
                }
                "toydb_cancel" => {
                    b("qy_plan", "ca_cancel");
                    PROCEDURES[2].1
                }
                "toydb_checkpoint" => {
                    b("qy_plan", "ca_checkpoint");
                    PROCEDURES[3].1
                }
                _ => {
                    b("qy_plan", "ca_unknown");
                    b("qy_plan", "ar_chk");
                    b("qy_plan", "ar_bad");
                    b("qy_plan", "call_done");
                    return Route::Reject(format!("unknown procedure: {name}"));
                }
            };
            b("qy_plan", "ar_chk");
            if arity != expected {
                b("qy_plan", "ar_bad");
                b("qy_plan", "call_done");
                return Route::Reject(format!(
                    "{name} expects {expected} arguments, got {arity}"
                ));
            }
            b("qy_plan", "ar_ok");
            b("qy_plan", "call_done");
            return match name {
                "toydb_cancel" => Route::Cancel,
                "toydb_checkpoint" => Route::Checkpoint,
                _ => Route::Forward(serialize(stmt)),
            };
        }
        other => return Route::Reject(format!("unsupported statement: {other}")),
    }
    Route::Forward(serialize(stmt))
}

/// Clause-shape walk for SELECT. Counts feature richness and clause
/// pairings; statements this deep only emerge from recombination.
fn plan_select(stmt: &Node) {
    let _f = sentinel::frame("toydb-query!qy_select");
    b("qy_select", "entry");

    let list = &stmt.children[0];
    b("qy_select", "sl_chk");
    let star = list.children.len() == 1 && list.children[0].label == "star";
    if star {
        b("qy_select", "sl_star");
    } else if list.children.len() == 1 {
        b("qy_select", "sl_one");
    } else {
        b("qy_select", "sl_multi");
    }

    b("qy_select", "fr_chk");
    let has_from = child(stmt, "from").is_some();
    if has_from {
        b("qy_select", "fr_yes");
    } else {
        b("qy_select", "fr_no");
    }

    b("qy_select", "has_where");
    let has_where = match child(stmt, "where") {
        Some(w) => {
            b("qy_select", "wd_chk");
            match bool_ops(&w.children[0]) {
                0 => b("qy_select", "wd0"),
                1 => b("qy_select", "wd1"),
                2 => b("qy_select", "wd2"),
                _ => b("qy_select", "wd3p"),
            }
            true
        }
        None => {
            hit_edge(QUERY, "qy_select", "has_where", "after_where");
            false
        }
    };
    b("qy_select", "after_where");

    b("qy_select", "ob_chk");
    let has_order = match child(stmt, "order-by") {
        None => {
            b("qy_select", "ob_none");
            false
        }
        Some(ob) => {
            match ob.children.len() {
                1 => b("qy_select", "ob1"),
                2 => b("qy_select", "ob2"),
                3 => b("qy_select", "ob3"),
                _ => {
                    b("qy_select", "ob4p");
                    sentinel::crash(
                        QUERY,
                        FaultKind::Segv,
                        "sort key scratch exhausted by deep ORDER BY",
                    );
                }
            }
            true
        }
    };

    b("qy_select", "li_chk");
    let has_limit = child(stmt, "limit").is_some();
    if has_limit {
        b("qy_select", "li_yes");
    } else {
        b("qy_select", "li_no");
    }

    b("qy_select", "fc_chk");
    let features = usize::from(has_from)
        + usize::from(has_where)
        + usize::from(has_order)
        + usize::from(has_limit)
        + usize::from(star || list.children.len() > 1);
    match features {
        0 => b("qy_select", "fc0"),
        1 => b("qy_select", "fc1"),
        2 => b("qy_select", "fc2"),
        3 => b("qy_select", "fc3"),
        4 => b("qy_select", "fc4"),
        _ => b("qy_select", "fc5"),
    }

    b("qy_select", "pwo_chk");
    if has_where && has_order {
        b("qy_select", "pwo_y");
    } else {
        b("qy_select", "pwo_n");
    }
    b("qy_select", "pwl_chk");
    if has_where && has_limit {
        b("qy_select", "pwl_y");
    } else {
        b("qy_select", "pwl_n");
    }
    b("qy_select", "pol_chk");
    if has_order && has_limit {
        b("qy_select", "pol_y");
    } else {
        b("qy_select", "pol_n");
    }
    b("qy_select", "tri_chk");
    if has_where && has_order && has_limit {
        b("qy_select", "tri_y");
    } else {
        b("qy_select", "tri_n");
    }
    b("qy_select", "sel_done");
}

fn bool_ops(node: &Node) -> usize {
    let own = usize::from(
        (node.label == "binary" && (node.text == "AND" || node.text == "OR"))
            || (node.label == "unary" && node.text == "NOT"),
    );
    own + node.children.iter().map(bool_ops).sum::<usize>()
}

/// One pass over every expression in the statement, flagging operator
/// families that appear anywhere inside it.
fn scan_exprs(stmt: &Node) {
    let _f = sentinel::frame("toydb-query!qy_exprs");
    b("qy_exprs", "entry");
    let mut flags = [false; 12];
    walk(stmt, &mut flags);
    let segs: [(&'static str, &'static str, &'static str); 12] = [
        ("and_chk", "and_y", "and_n"),
        ("or_chk", "or_y", "or_n"),
        ("not_chk", "not_y", "not_n"),
        ("neg_chk", "neg_y", "neg_n"),
        ("eq_chk", "eq_y", "eq_n"),
        ("ne_chk", "ne_y", "ne_n"),
        ("ord_chk", "ord_y", "ord_n"),
        ("add_chk", "add_y", "add_n"),
        ("mul_chk", "mul_y", "mul_n"),
        ("func_chk", "func_y", "func_n"),
        ("str_chk", "str_y", "str_n"),
        ("paren_chk", "paren_y", "paren_n"),
    ];
    for (i, seg) in segs.iter().enumerate() {
        b("qy_exprs", seg.0);
        if flags[i] {
            b("qy_exprs", seg.1);
        } else {
            b("qy_exprs", seg.2);
        }
    }
    b("qy_exprs", "ex_done");
}

fn walk(node: &Node, flags: &mut [bool; 12]) {
    match node.label {
        "binary" => match node.text.as_str() {
            "AND" => flags[0] = true,
            "OR" => flags[1] = true,
            "=" => flags[4] = true,
            "<>" | "!=" => flags[5] = true,
            "<" | "<=" | ">" | ">=" => flags[6] = true,
            "+" | "-" => flags[7] = true,
            "*" | "/" | "%" => flags[8] = true,
            _ => {}
        },
        "unary" => {
            if node.text == "NOT" {
                flags[2] = true;
            } else {
                flags[3] = true;
            }
        }
        "func" => flags[9] = true,
        "string" => flags[10] = true,
        "paren" => flags[11] = true,
        _ => {}
    }
    for c in &node.children {
        walk(c, flags);
    }
}
