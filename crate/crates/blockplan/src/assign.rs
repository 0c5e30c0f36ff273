//! Counter assignment: one counter slot per block, no hashing.
//!
//! Slots are handed out in declaration order (functions in manifest order,
//! blocks in declaration order within each function), so the mapping is a
//! bijection between blocks and [0, block_count).

use std::collections::HashMap;

use crate::error::PlanError;
use crate::manifest::{BinaryManifest, BlockId};

/// Bijective block-to-counter mapping for one binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterAssignment {
    pub binary_id: String,
    /// Slot index -> block. `blocks.len()` is the counter region length.
    pub blocks: Vec<BlockId>,
    index: HashMap<BlockId, u32>,
}

impl CounterAssignment {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn slot_of(&self, block: &BlockId) -> Option<u32> {
        self.index.get(block).copied()
    }

    pub fn block_at(&self, slot: u32) -> Option<&BlockId> {
        self.blocks.get(slot as usize)
    }

    /// Slot of a block addressed by function and block name.
    pub fn slot_of_named(&self, manifest: &BinaryManifest, function: &str, block: &str) -> Option<u32> {
        let f = manifest.function(function)?;
        let index = f.block_index(block)?;
        self.slot_of(&BlockId {
            binary: self.binary_id.clone(),
            function: function.to_string(),
            index,
        })
    }
}

/// Assign counter slots for a (split) manifest.
pub fn assign_counters(manifest: &BinaryManifest) -> Result<CounterAssignment, PlanError> {
    let mut blocks = Vec::with_capacity(manifest.block_count());
    let mut index = HashMap::with_capacity(manifest.block_count());
    for f in &manifest.functions {
        for (i, _) in f.blocks.iter().enumerate() {
            let id = BlockId {
                binary: manifest.binary_id.clone(),
                function: f.name.clone(),
                index: i as u32,
            };
            let slot = blocks.len() as u32;
            if index.insert(id.clone(), slot).is_some() {
                return Err(PlanError::DuplicateBlock {
                    function: f.name.clone(),
                    block: f.blocks[i].clone(),
                });
            }
            blocks.push(id);
        }
    }
    Ok(CounterAssignment {
        binary_id: manifest.binary_id.clone(),
        blocks,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::parse_manifest;

    #[test]
    fn assignment_is_a_bijection_in_declaration_order() {
        let m = parse_manifest(
            "binary q\nfunction f entry A\nblock A\nblock B\nedge A B\nfunction g entry C\nblock C\n",
        )
        .unwrap();
        let a = assign_counters(&m).unwrap();
        assert_eq!(a.len(), 3);
        for (slot, block) in a.blocks.iter().enumerate() {
            assert_eq!(a.slot_of(block), Some(slot as u32));
            assert_eq!(a.block_at(slot as u32), Some(block));
        }
        assert_eq!(a.slot_of_named(&m, "f", "A"), Some(0));
        assert_eq!(a.slot_of_named(&m, "f", "B"), Some(1));
        assert_eq!(a.slot_of_named(&m, "g", "C"), Some(2));
        assert_eq!(a.slot_of_named(&m, "g", "Z"), None);
    }
}
