//! Shared coverage collection for a dynamic set of processes.
//!
//! One memory-mapped counter region serves every binary of the target: a
//! process attaches to its own window (per the planned layout), bumps one
//! saturating counter per executed block, and the fuzzer snapshots the
//! whole region between test cases to classify novelty.

mod classify;
mod dump;
mod error;
mod region;

pub use classify::{bucket, classify, union_into, CumulativeTable, NoveltyReport};
pub use dump::{parse_snapshot, render_snapshot};
pub use error::CovError;
pub use region::{
    attach_from_env, attach_to, region_path, AttachedWindow, CoverageRegion, CoverageSnapshot,
    WindowView,
    ENV_BINARY, ENV_REGION,
};
