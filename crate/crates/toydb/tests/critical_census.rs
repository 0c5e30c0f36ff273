//! Structural guarantees the instrumentation relies on: the CFGs stay
//! critical-edge-free except for the one deliberately planted WHERE skip
//! edge, the planner mints exactly one dummy for it, and counter
//! assignment is a dense bijection over the split blocks.

mod util;

use blockplan::{find_critical_edges, plan_binary, BlockId, DUMMY_MARKER};

#[test]
fn the_where_skip_edge_is_the_only_critical_edge() {
    let mut criticals = Vec::new();
    for m in util::manifests() {
        for func in &m.functions {
            for (u, v) in find_critical_edges(func) {
                criticals.push((
                    m.binary_id.clone(),
                    func.name.clone(),
                    func.blocks[u as usize].clone(),
                    func.blocks[v as usize].clone(),
                ));
            }
        }
    }
    assert_eq!(
        criticals,
        vec![(
            "toydb-query".to_string(),
            "qy_select".to_string(),
            "has_where".to_string(),
            "after_where".to_string(),
        )],
        "exactly one deliberate critical edge"
    );
}

#[test]
fn planning_mints_exactly_one_dummy_block() {
    let mut dummies = Vec::new();
    for m in util::manifests() {
        let (split, _) = plan_binary(&m).expect("plans");
        for func in &split.functions {
            for block in &func.blocks {
                if block.ends_with(DUMMY_MARKER) {
                    dummies.push(format!("{}:{}/{}", m.binary_id, func.name, block));
                }
            }
        }
        // splitting must not drop or rename any original block
        for (orig, planned) in m.functions.iter().zip(&split.functions) {
            assert_eq!(orig.name, planned.name);
            for block in &orig.blocks {
                assert!(planned.blocks.contains(block), "{block} survives the split");
            }
        }
    }
    assert_eq!(
        dummies,
        vec!["toydb-query:qy_select/has_where->after_where__crit".to_string()]
    );
}

#[test]
fn counter_assignment_is_a_dense_bijection() {
    for m in util::manifests() {
        let (split, assignment) = plan_binary(&m).expect("plans");
        let total: usize = split.functions.iter().map(|f| f.blocks.len()).sum();
        assert_eq!(assignment.len(), total, "{}: one slot per split block", m.binary_id);

        let mut seen = vec![false; total];
        for func in &split.functions {
            for block in &func.blocks {
                let slot = assignment
                    .slot_of_named(&split, &func.name, block)
                    .unwrap_or_else(|| panic!("{}/{block} unassigned", func.name));
                assert!((slot as usize) < total, "slot {slot} in range");
                assert!(!seen[slot as usize], "slot {slot} assigned twice");
                seen[slot as usize] = true;

                let back: &BlockId = assignment.block_at(slot).expect("slot maps back");
                assert_eq!(back.binary, m.binary_id);
                assert_eq!(back.function, func.name);
                assert_eq!(&split.function(&back.function).unwrap().blocks[back.index as usize], block);
            }
        }
        assert!(seen.iter().all(|&s| s), "{}: no unassigned slot", m.binary_id);
    }
}
