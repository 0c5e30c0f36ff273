//! Critical edge detection and splitting.
//!
//! An edge (u, v) is critical when u has more than one successor and v has
//! more than one predecessor. Covering u and v individually then says
//! nothing about whether the edge itself ran, so a dummy block is inserted
//! on it. After splitting, block coverage of the dummy is equivalent to
//! edge coverage of the original edge.

use crate::manifest::FunctionCfg;

/// Suffix marking inserted dummy blocks. Banned in input manifests.
pub const DUMMY_MARKER: &str = "__crit";

/// Critical edges of one function as (src, dst) index pairs, sorted
/// lexicographically by the endpoint block names.
pub fn find_critical_edges(f: &FunctionCfg) -> Vec<(u32, u32)> {
    let out = f.out_degrees();
    let ins = f.in_degrees();
    let mut found: Vec<(u32, u32)> = f
        .edges
        .iter()
        .copied()
        .filter(|&(s, d)| out[s as usize] > 1 && ins[d as usize] > 1)
        .collect();
    found.sort_by(|a, b| {
        let ka = (&f.blocks[a.0 as usize], &f.blocks[a.1 as usize]);
        let kb = (&f.blocks[b.0 as usize], &f.blocks[b.1 as usize]);
        ka.cmp(&kb)
    });
    found
}

/// Split every critical edge of `f` by inserting one dummy block per edge.
///
/// The edge (u, v) is replaced by (u, d) and (d, v) with d named
/// `{u}->{v}__crit` and appended after all original blocks. Splitting all
/// critical edges found in the input at once never creates a new critical
/// edge: every dummy has exactly one predecessor and one successor, and
/// degrees of original blocks are unchanged.
pub fn split_critical_edges(f: &FunctionCfg) -> FunctionCfg {
    let critical = find_critical_edges(f);
    if critical.is_empty() {
        return f.clone();
    }
    let mut blocks = f.blocks.clone();
    let mut edges: Vec<(u32, u32)> = f
        .edges
        .iter()
        .copied()
        .filter(|e| !critical.contains(e))
        .collect();
    for &(u, v) in &critical {
        let dummy = format!("{}->{}{}", f.blocks[u as usize], f.blocks[v as usize], DUMMY_MARKER);
        let d = blocks.len() as u32;
        blocks.push(dummy);
        edges.push((u, d));
        edges.push((d, v));
    }
    FunctionCfg {
        name: f.name.clone(),
        blocks,
        edges,
        entry: f.entry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(blocks: &[&str], edges: &[(u32, u32)], entry: u32) -> FunctionCfg {
        FunctionCfg {
            name: "f".into(),
            blocks: blocks.iter().map(|s| s.to_string()).collect(),
            edges: edges.to_vec(),
            entry,
        }
    }

    // Diamond with a shortcut: entry branches to then/merge, then joins at
    // merge. entry->merge is the canonical critical edge.
    fn diamond_shortcut() -> FunctionCfg {
        cfg(&["entry", "then", "merge"], &[(0, 1), (0, 2), (1, 2)], 0)
    }

    #[test]
    fn detects_shortcut_edge_as_critical() {
        let f = diamond_shortcut();
        assert_eq!(find_critical_edges(&f), vec![(0, 2)]);
    }

    #[test]
    fn plain_diamond_has_no_critical_edges() {
        let f = cfg(
            &["entry", "then", "else", "merge"],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
            0,
        );
        assert!(find_critical_edges(&f).is_empty());
    }

    #[test]
    fn split_inserts_named_dummy_and_rewires() {
        let f = diamond_shortcut();
        let s = split_critical_edges(&f);
        assert_eq!(s.blocks, vec!["entry", "then", "merge", "entry->merge__crit"]);
        let d = 3u32;
        assert!(s.edges.contains(&(0, d)));
        assert!(s.edges.contains(&(d, 2)));
        assert!(!s.edges.contains(&(0, 2)));
        assert_eq!(s.edges.len(), f.edges.len() + 1);
    }

    #[test]
    fn split_is_idempotent_on_critical_edges() {
        let f = diamond_shortcut();
        let s = split_critical_edges(&f);
        assert!(find_critical_edges(&s).is_empty());
        assert_eq!(split_critical_edges(&s), s);
    }

    #[test]
    fn multiple_critical_edges_sorted_by_name() {
        // Two branch heads (a, b) fanning into two join points (x, y):
        // every edge is critical. Order is by (src name, dst name).
        let f = cfg(
            &["b", "a", "y", "x"],
            &[(0, 2), (0, 3), (1, 2), (1, 3)],
            1,
        );
        let crit = find_critical_edges(&f);
        assert_eq!(crit, vec![(1, 3), (1, 2), (0, 3), (0, 2)]);
        let s = split_critical_edges(&f);
        assert_eq!(s.blocks.len(), 8);
        assert_eq!(s.blocks[4], "a->x__crit");
        assert!(find_critical_edges(&s).is_empty());
    }
}
