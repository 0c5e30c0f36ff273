//! Coverage-guided fuzzer for multi-process SQL targets.
//!
//! The pipeline: plan counter layouts from per-binary CFG manifests
//! (`blockplan`), share one counter region across every target process
//! (`covmap`), generate statements by tree and token mutation (`sqlgen`),
//! schedule retained cases by energy, execute them against a supervised
//! process group, and triage anomalies online into deduplicated report
//! bundles.

pub mod analyze;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fuzz;
pub mod proto;
pub mod replay;
pub mod rings;
pub mod supervise;
pub mod target;

pub use config::Config;
pub use error::FuzzError;
