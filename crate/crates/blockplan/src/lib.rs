//! Instrumentation planning for multi-binary coverage collection.
//!
//! The planner consumes textual CFG manifests (one per target binary),
//! splits critical edges with dummy blocks, assigns every block a unique
//! counter (a bijection, so the feedback map has zero hash collisions),
//! and links the per-binary counter ranges into one conflict-free global
//! layout that a dynamic set of processes can share.

mod assign;
mod cfg;
mod error;
mod layout;
mod manifest;

pub use assign::{assign_counters, CounterAssignment};
pub use cfg::{find_critical_edges, split_critical_edges, DUMMY_MARKER};
pub use error::PlanError;
pub use layout::{link_layouts, parse_layout, render_layout, verify_layout, GlobalLayout, LayoutEntry, ALIGNMENT};
pub use manifest::{parse_manifest, render_manifest, BinaryManifest, BlockId, FunctionCfg};

/// Mean number of blocks forced to share one counter when `n_blocks` are
/// hashed into a fixed map of `n_counters` slots, assuming a best-case
/// (perfectly even) assignment. The bijective mapping avoids this load
/// entirely; this estimate exists to quantify the baseline it replaces.
pub fn estimate_collision_load(n_blocks: u64, n_counters: u64) -> Result<f64, PlanError> {
    if n_counters == 0 {
        return Err(PlanError::ZeroCounters);
    }
    Ok(n_blocks as f64 / n_counters as f64)
}

/// Split every function of `manifest` and assign counters to the result.
pub fn plan_binary(manifest: &BinaryManifest) -> Result<(BinaryManifest, CounterAssignment), PlanError> {
    let split = BinaryManifest {
        binary_id: manifest.binary_id.clone(),
        functions: manifest.functions.iter().map(split_critical_edges).collect(),
    };
    let assignment = assign_counters(&split)?;
    Ok((split, assignment))
}

/// Full planning pipeline over a manifest set: split, assign, link.
pub fn plan_all(manifests: &[BinaryManifest]) -> Result<(Vec<CounterAssignment>, GlobalLayout), PlanError> {
    let mut assignments = Vec::with_capacity(manifests.len());
    for m in manifests {
        let (_, a) = plan_binary(m)?;
        assignments.push(a);
    }
    let sizes: Vec<(String, u64)> = assignments
        .iter()
        .map(|a| (a.binary_id.clone(), a.len() as u64))
        .collect();
    let layout = link_layouts(&sizes)?;
    Ok((assignments, layout))
}
