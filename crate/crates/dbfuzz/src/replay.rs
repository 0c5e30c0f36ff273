//! Re-execute a bundle's input against a fresh target.
//!
//! Replay is a report, not a verdict: stateful bugs legitimately fail to
//! reproduce from a single input, so non-reproduction is an expected
//! outcome, never an error. Each attempt runs against a freshly launched
//! target and is triaged against a fresh, empty cumulative table, so the
//! novel set (and therefore the dedup key) is identical across attempts
//! of the same deterministic crash.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use covmap::{classify, CumulativeTable};
use sqlgen::split_statements;

use crate::analyze::{hex, stack_digest, termination_field, Analyzer, AnomalyEvent, AnomalyKind};
use crate::config::Config;
use crate::error::FuzzError;
use crate::fuzz::{epoch_secs, fresh_session_name};
use crate::target::{CaseStatus, Session, TargetSpec};

#[derive(Debug, Clone)]
pub struct ReplayAttempt {
    pub attempt: u32,
    /// `ok`, a signal name, `timeout`, or `connection-lost`.
    pub outcome: String,
    /// Whether the observed stack digest matches the bundle's.
    pub stack_match: bool,
}

#[derive(Debug)]
pub struct ReplayReport {
    pub bundle: PathBuf,
    pub attempts: Vec<ReplayAttempt>,
    pub reproduced: u32,
    /// Session dir holding the replay's own registry and bundles.
    pub session_dir: PathBuf,
}

pub fn replay_bundle(
    cfg: &Config,
    bundle: &Path,
    times: u32,
    session: Option<String>,
) -> Result<ReplayReport, FuzzError> {
    let input = std::fs::read_to_string(bundle.join("input.sql"))
        .map_err(|e| FuzzError::Target(format!("bundle {}: {e}", bundle.display())))?;
    let statements = split_statements(&input);
    if statements.is_empty() {
        return Err(FuzzError::Target(format!("bundle {} has an empty input", bundle.display())));
    }
    let term = std::fs::read_to_string(bundle.join("termination.log")).unwrap_or_default();
    let expected_stack = termination_field(&term, "stack_digest").unwrap_or_default();

    let layout_text = std::fs::read_to_string(&cfg.layout)?;
    let layout = blockplan::parse_layout(&layout_text)?;
    let session_name = session.unwrap_or_else(fresh_session_name);
    let session_dir = cfg.reports.join(&session_name);
    let mut analyzer = Analyzer::new(session_dir.clone(), layout.clone())?;

    let mut target = Session::create(TargetSpec::from_config(cfg), &layout)?;
    let stmt_timeout = Duration::from_millis(cfg.stmt_timeout_ms);
    let case_timeout = Duration::from_millis(cfg.case_timeout_ms);

    let mut attempts = Vec::new();
    let mut reproduced = 0u32;
    for attempt in 1..=times {
        target
            .launch()
            .map_err(|e| FuzzError::Target(format!("attempt {attempt}: {e}")))?;
        let outcome = target.run_case(&statements, stmt_timeout, case_timeout);

        // fresh table per attempt: the whole covered set counts as novel
        let fresh = CumulativeTable::new(layout.total_length as usize);
        let novel: BTreeSet<u64> =
            classify(&outcome.snapshot, &fresh)?.new_blocks.into_iter().collect();

        let (outcome_label, stack_match) = match &outcome.status {
            CaseStatus::Ok => ("ok".to_string(), false),
            CaseStatus::ConnectionLost => ("connection-lost".to_string(), false),
            CaseStatus::Crash { binary, pid, signal, frames, detail, sp } => {
                let observed = hex(&stack_digest(frames));
                let matched = observed == expected_stack;
                analyzer.triage(AnomalyEvent {
                    binary_id: binary.clone(),
                    process_id: *pid,
                    kind: AnomalyKind::Crash { signal: signal.clone() },
                    frames: frames.clone(),
                    detail: detail.clone(),
                    sp: sp.clone(),
                    coverage: outcome.snapshot.counters.clone(),
                    novel,
                    log_tail: outcome.log_tail.clone(),
                    statements: statements.clone(),
                    occurred_at: epoch_secs(),
                })?;
                (signal.clone(), matched)
            }
            CaseStatus::Timeout { binary, pid, detail } => {
                analyzer.triage(AnomalyEvent {
                    binary_id: binary.clone(),
                    process_id: *pid,
                    kind: AnomalyKind::Timeout,
                    frames: Vec::new(),
                    detail: detail.clone(),
                    sp: String::new(),
                    coverage: outcome.snapshot.counters.clone(),
                    novel,
                    log_tail: outcome.log_tail.clone(),
                    statements: statements.clone(),
                    occurred_at: epoch_secs(),
                })?;
                ("timeout".to_string(), false)
            }
        };
        if stack_match {
            reproduced += 1;
        }
        attempts.push(ReplayAttempt { attempt, outcome: outcome_label, stack_match });
    }
    analyzer.flush()?;
    target.shutdown();
    Ok(ReplayReport { bundle: bundle.to_path_buf(), attempts, reproduced, session_dir })
}
