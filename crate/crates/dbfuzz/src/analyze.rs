//! Online anomaly triage: dedup keys, the anomaly registry, and report
//! bundles.
//!
//! Every anomaly is keyed by a stack digest (top frames, addresses
//! stripped) plus a coverage digest (counter indices novel at the event);
//! both components must match for two events to count as the same
//! anomaly. Inside a campaign the case's coverage is folded into the
//! cumulative table before triage, so the novel set at triage is empty and
//! the stack alone discriminates; a replay harness triages against a fresh
//! table, so identical replays produce identical nonempty novel sets and
//! still collapse to one key. Stalls have no reliable stack and are keyed
//! by (binary, "timeout", digest of the statement that stalled).
//!
//! The first occurrence of a key gets a full on-disk bundle; duplicates
//! only advance a counter in the append-only registry. A bundle is written
//! completely (staged, then renamed) before its key is recorded, so a
//! registry entry always implies a readable bundle.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use blockplan::GlobalLayout;
use sha2::{Digest, Sha256};

use crate::error::FuzzError;

/// Frames hashed into the stack half of a dedup key.
pub const STACK_KEY_DEPTH: usize = 5;
/// Hard cap on `dump.bin`.
pub const DUMP_CAP: usize = 1 << 20;

pub const REGISTRY_FILE: &str = "registry.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnomalyKind {
    Crash { signal: String },
    Timeout,
}

impl AnomalyKind {
    pub fn label(&self) -> &str {
        match self {
            AnomalyKind::Crash { signal } => signal,
            AnomalyKind::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnomalyEvent {
    pub binary_id: String,
    pub process_id: u32,
    pub kind: AnomalyKind,
    /// Innermost-first `binary!symbol` frames. Nonempty for crashes;
    /// usually empty for timeouts (the stalled process was killed, not
    /// unwound).
    pub frames: Vec<String>,
    pub detail: String,
    /// Stack-extent probe from the fault record; empty when unknown.
    pub sp: String,
    /// Full global counter snapshot at the event.
    pub coverage: Vec<u8>,
    /// Counter indices novel relative to the caller's cumulative table.
    pub novel: BTreeSet<u64>,
    pub log_tail: Vec<u8>,
    pub statements: Vec<String>,
    pub occurred_at: u64,
}

impl AnomalyEvent {
    pub fn last_statement(&self) -> &str {
        self.statements.last().map(String::as_str).unwrap_or("")
    }
}

/// Strip address-only symbols so keys survive address-space layout
/// differences between runs.
fn normalize_frame(frame: &str) -> String {
    match frame.split_once('!') {
        Some((binary, symbol)) if symbol.starts_with("0x") => format!("{binary}!<addr>"),
        _ => frame.to_string(),
    }
}

pub fn stack_digest(frames: &[String]) -> [u8; 32] {
    let mut h = Sha256::new();
    for f in frames.iter().take(STACK_KEY_DEPTH) {
        h.update(normalize_frame(f).as_bytes());
        h.update([0]);
    }
    h.finalize().into()
}

pub fn coverage_digest(novel: &BTreeSet<u64>) -> [u8; 32] {
    let mut h = Sha256::new();
    for idx in novel {
        h.update(idx.to_le_bytes());
    }
    h.finalize().into()
}

/// Both halves of an anomaly's identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DedupKey {
    pub stack: [u8; 32],
    pub coverage: [u8; 32],
}

impl DedupKey {
    /// Registry/bundle-directory form: one hash over both halves, so two
    /// keys are equal exactly when both components are.
    pub fn hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.stack);
        h.update(self.coverage);
        let combined: [u8; 32] = h.finalize().into();
        hex(&combined)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Marker line separating the structured header of a termination log from
/// the raw server output tail.
pub const TERMINATION_TAIL_MARKER: &str = "-- server output tail --";

/// Looks up a `key value` line in a termination log's header. Only header
/// lines are consulted; the output tail after the marker could contain
/// anything the target printed.
pub fn termination_field(log: &str, key: &str) -> Option<String> {
    log.lines()
        .take_while(|l| *l != TERMINATION_TAIL_MARKER)
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).map(str::to_string))
}

pub fn event_key(event: &AnomalyEvent) -> DedupKey {
    match &event.kind {
        AnomalyKind::Crash { .. } => DedupKey {
            stack: stack_digest(&event.frames),
            coverage: coverage_digest(&event.novel),
        },
        AnomalyKind::Timeout => {
            let mut h = Sha256::new();
            h.update(b"timeout\0");
            h.update(event.binary_id.as_bytes());
            h.update([0]);
            h.update(Sha256::digest(event.last_statement().as_bytes()));
            DedupKey { stack: h.finalize().into(), coverage: [0; 32] }
        }
    }
}

/// Append-only key → (count, first-seen) store. Each update appends a full
/// `key count first-seen` line; loading folds to the last line per key, so
/// a torn tail line costs at most one increment.
#[derive(Debug)]
pub struct Registry {
    path: PathBuf,
    counts: HashMap<String, (u64, u64)>,
}

impl Registry {
    pub fn load(path: PathBuf) -> io::Result<Registry> {
        let mut counts = HashMap::new();
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                for line in text.lines() {
                    let mut parts = line.split_whitespace();
                    let (Some(key), Some(count), Some(first)) = (parts.next(), parts.next(), parts.next())
                    else {
                        continue;
                    };
                    let (Ok(count), Ok(first)) = (count.parse(), first.parse()) else { continue };
                    counts.insert(key.to_string(), (count, first));
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(Registry { path, counts })
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).map_or(0, |(c, _)| *c)
    }

    pub fn first_seen(&self, key: &str) -> Option<u64> {
        self.counts.get(key).map(|(_, f)| *f)
    }

    /// Keys ordered by first-seen time, then key text.
    pub fn keys(&self) -> Vec<String> {
        let mut keys: Vec<(&String, &(u64, u64))> = self.counts.iter().collect();
        keys.sort_by(|a, b| (a.1 .1, a.0).cmp(&(b.1 .1, b.0)));
        keys.into_iter().map(|(k, _)| k.clone()).collect()
    }

    fn record(&mut self, key: &str, now_epoch: u64) -> io::Result<u64> {
        let (prev, first) = self.counts.get(key).copied().unwrap_or((0, now_epoch));
        let count = prev + 1;
        // append before mutating memory, so a write failure leaves the
        // in-memory view consistent with the file
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(file, "{key} {count} {first}")?;
        self.counts.insert(key.to_string(), (count, first));
        Ok(count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triaged {
    pub key_hex: String,
    /// Occurrences of this key including the current one. 1 means a fresh
    /// bundle was written.
    pub count: u64,
    pub bundle_dir: Option<PathBuf>,
    /// The bundle could not be written; the event is parked for one retry.
    pub requeued: bool,
}

/// Single-owner triage pipeline for one campaign session.
pub struct Analyzer {
    session_dir: PathBuf,
    registry: Registry,
    layout: GlobalLayout,
    requeued: Option<Box<AnomalyEvent>>,
}

impl Analyzer {
    /// `session_dir` is `reports/<session>`; created if absent.
    pub fn new(session_dir: PathBuf, layout: GlobalLayout) -> Result<Analyzer, FuzzError> {
        std::fs::create_dir_all(&session_dir)?;
        let registry = Registry::load(session_dir.join(REGISTRY_FILE))?;
        Ok(Analyzer { session_dir, registry, layout, requeued: None })
    }

    pub fn session_dir(&self) -> &Path {
        &self.session_dir
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn triage(&mut self, event: AnomalyEvent) -> Result<Triaged, FuzzError> {
        // one parked event gets its single retry before new work
        if let Some(parked) = self.requeued.take() {
            let key = event_key(&parked);
            if let Err(e) = self.commit(&parked, &key) {
                eprintln!("triage: dropping anomaly {} after failed retry: {e}", key.hex());
            }
        }
        if matches!(event.kind, AnomalyKind::Crash { .. }) && event.frames.is_empty() {
            return Err(FuzzError::Target("crash event with empty stack".into()));
        }
        if event.coverage.len() as u64 != self.layout.total_length {
            return Err(FuzzError::Target(format!(
                "event coverage length {} does not match layout {}",
                event.coverage.len(),
                self.layout.total_length
            )));
        }
        let key = event_key(&event);
        match self.commit(&event, &key) {
            Ok(triaged) => Ok(triaged),
            Err(_) if self.requeued.is_none() => {
                let key_hex = key.hex();
                self.requeued = Some(Box::new(event));
                Ok(Triaged { key_hex, count: 0, bundle_dir: None, requeued: true })
            }
            Err(e) => Err(e),
        }
    }

    /// Retry a parked bundle write, e.g. at campaign end.
    pub fn flush(&mut self) -> Result<(), FuzzError> {
        if let Some(parked) = self.requeued.take() {
            let key = event_key(&parked);
            self.commit(&parked, &key)?;
        }
        Ok(())
    }

    fn commit(&mut self, event: &AnomalyEvent, key: &DedupKey) -> Result<Triaged, FuzzError> {
        let key_hex = key.hex();
        let mut bundle_dir = None;
        if self.registry.count(&key_hex) == 0 {
            bundle_dir = Some(self.write_bundle(event, key, &key_hex)?);
        }
        let count = self.registry.record(&key_hex, event.occurred_at)?;
        Ok(Triaged { key_hex, count, bundle_dir, requeued: false })
    }

    fn write_bundle(&self, event: &AnomalyEvent, key: &DedupKey, key_hex: &str) -> Result<PathBuf, FuzzError> {
        let final_dir = self.session_dir.join(key_hex);
        let stage = self.session_dir.join(format!(".{key_hex}.stage"));
        let _ = std::fs::remove_dir_all(&stage);
        let result = self.write_bundle_files(event, key, key_hex, &stage).and_then(|()| {
            std::fs::rename(&stage, &final_dir)?;
            Ok(())
        });
        if result.is_err() {
            let _ = std::fs::remove_dir_all(&stage);
        }
        result.map(|()| final_dir)
    }

    fn write_bundle_files(
        &self,
        event: &AnomalyEvent,
        key: &DedupKey,
        key_hex: &str,
        dir: &Path,
    ) -> Result<(), FuzzError> {
        std::fs::create_dir(dir)?;

        let mut input = event.statements.join(";\n");
        input.push('\n');
        std::fs::write(dir.join("input.sql"), input)?;

        let mut stack = String::new();
        if event.frames.is_empty() {
            stack.push_str("(no stack: process was killed after a stall, not unwound)\n");
        }
        for (i, f) in event.frames.iter().enumerate() {
            stack.push_str(&format!("#{i} {f}\n"));
        }
        std::fs::write(dir.join("stacktrace.txt"), stack)?;

        std::fs::write(dir.join("coverage.snap"), covmap::render_snapshot(&event.coverage)?)?;

        let mut term = String::new();
        term.push_str(&format!("anomaly {}\n", event.kind.label()));
        term.push_str(&format!("binary {}\n", event.binary_id));
        term.push_str(&format!("pid {}\n", event.process_id));
        term.push_str(&format!("detail {}\n", event.detail));
        term.push_str(&format!("last_statement {}\n", event.last_statement()));
        term.push_str(&format!("epoch {}\n", event.occurred_at));
        term.push_str(&format!("key {key_hex}\n"));
        term.push_str(&format!("stack_digest {}\n", hex(&key.stack)));
        term.push_str(&format!("coverage_digest {}\n", hex(&key.coverage)));
        term.push_str(&format!("statements {}\n", event.statements.len()));
        term.push_str(&format!("novel_blocks {}\n", event.novel.len()));
        term.push_str(&format!(
            "top_frame {}\n",
            event.frames.first().map(String::as_str).unwrap_or("")
        ));
        term.push_str("-- server output tail --\n");
        term.push_str(&String::from_utf8_lossy(&event.log_tail));
        std::fs::write(dir.join("termination.log"), term)?;

        std::fs::write(dir.join("dump.bin"), build_dump(event, &self.layout))?;
        Ok(())
    }
}

/// Customized dump: pseudo-registers and frames from the fault record, the
/// crashed binary's own counter window, and the output tail. Sections are
/// sized so the whole artifact stays under [`DUMP_CAP`] instead of dumping
/// whole address spaces.
fn build_dump(event: &AnomalyEvent, layout: &GlobalLayout) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"DUMP1\n");
    out.extend_from_slice(b"[registers]\n");
    out.extend_from_slice(format!("sp {}\n", if event.sp.is_empty() { "?" } else { &event.sp }).as_bytes());
    out.extend_from_slice(
        format!("site {}\n", event.frames.first().map(String::as_str).unwrap_or("?")).as_bytes(),
    );
    out.extend_from_slice(b"[frames]\n");
    for f in &event.frames {
        out.extend_from_slice(f.as_bytes());
        out.push(b'\n');
    }
    match layout.window(&event.binary_id) {
        Some(w) => {
            out.extend_from_slice(
                format!("[window {} offset {} length {}]\n", w.binary_id, w.offset, w.length).as_bytes(),
            );
            let lo = w.offset as usize;
            let hi = ((w.offset + w.length) as usize).min(event.coverage.len());
            let window = &event.coverage[lo.min(event.coverage.len())..hi];
            // a window larger than half the cap would crowd out the tail
            let keep = window.len().min(DUMP_CAP / 2);
            out.extend_from_slice(&window[..keep]);
            out.push(b'\n');
        }
        None => out.extend_from_slice(b"[window unknown]\n"),
    }
    out.extend_from_slice(b"[output]\n");
    let room = DUMP_CAP.saturating_sub(out.len());
    let tail = &event.log_tail[event.log_tail.len().saturating_sub(room)..];
    out.extend_from_slice(tail);
    out.truncate(DUMP_CAP);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stack_digest_uses_only_top_frames_and_strips_addresses() {
        let a = frames(&["b!f1", "b!f2", "b!f3", "b!f4", "b!f5", "b!deep6"]);
        let b = frames(&["b!f1", "b!f2", "b!f3", "b!f4", "b!f5", "b!other6"]);
        assert_eq!(stack_digest(&a), stack_digest(&b), "frame 6 must not matter");
        let c = frames(&["b!0x7f001234", "b!f2"]);
        let d = frames(&["b!0x7f00beef", "b!f2"]);
        assert_eq!(stack_digest(&c), stack_digest(&d), "addresses must be stripped");
        assert_ne!(stack_digest(&a), stack_digest(&c));
    }

    #[test]
    fn both_key_halves_must_match() {
        let stack_a = stack_digest(&frames(&["b!f"]));
        let novel_a: BTreeSet<u64> = [1, 2].into_iter().collect();
        let novel_b: BTreeSet<u64> = [1, 3].into_iter().collect();
        let k1 = DedupKey { stack: stack_a, coverage: coverage_digest(&novel_a) };
        let k2 = DedupKey { stack: stack_a, coverage: coverage_digest(&novel_b) };
        let k3 = DedupKey { stack: stack_a, coverage: coverage_digest(&novel_a) };
        assert_ne!(k1.hex(), k2.hex(), "same stack, different novel set");
        assert_eq!(k1.hex(), k3.hex());
    }

    #[test]
    fn timeout_keys_depend_on_binary_and_last_statement() {
        let base = AnomalyEvent {
            binary_id: "st".into(),
            process_id: 1,
            kind: AnomalyKind::Timeout,
            frames: vec![],
            detail: String::new(),
            sp: String::new(),
            coverage: vec![],
            novel: BTreeSet::new(),
            log_tail: vec![],
            statements: vec!["CALL toydb_sleep(65535)".into()],
            occurred_at: 0,
        };
        let mut other_stmt = base.clone();
        other_stmt.statements = vec!["CALL toydb_sleep(99999)".into()];
        let mut other_bin = base.clone();
        other_bin.binary_id = "qy".into();
        assert_ne!(event_key(&base).hex(), event_key(&other_stmt).hex());
        assert_ne!(event_key(&base).hex(), event_key(&other_bin).hex());
        assert_eq!(event_key(&base).hex(), event_key(&base.clone()).hex());
    }

    #[test]
    fn registry_folds_to_the_last_line_per_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REGISTRY_FILE);
        let mut reg = Registry::load(path.clone()).unwrap();
        assert_eq!(reg.record("k1", 100).unwrap(), 1);
        assert_eq!(reg.record("k1", 200).unwrap(), 2);
        assert_eq!(reg.record("k2", 150).unwrap(), 1);
        let reloaded = Registry::load(path).unwrap();
        assert_eq!(reloaded.count("k1"), 2);
        assert_eq!(reloaded.first_seen("k1"), Some(100), "first-seen survives increments");
        assert_eq!(reloaded.keys(), vec!["k1".to_string(), "k2".to_string()]);
    }

    #[test]
    fn dump_respects_the_size_cap() {
        let layout = blockplan::link_layouts(&[("b".to_string(), 100)]).unwrap();
        let event = AnomalyEvent {
            binary_id: "b".into(),
            process_id: 7,
            kind: AnomalyKind::Crash { signal: "SIGSEGV".into() },
            frames: frames(&["b!f"]),
            detail: "d".into(),
            sp: "0x1".into(),
            coverage: vec![1; layout.total_length as usize],
            novel: BTreeSet::new(),
            log_tail: vec![b'z'; 64 * 1024],
            statements: vec!["SELECT 1".into()],
            occurred_at: 1,
        };
        let dump = build_dump(&event, &layout);
        assert!(dump.len() <= DUMP_CAP);
        assert!(dump.starts_with(b"DUMP1\n"));
        assert!(dump.ends_with(b"zzzz"), "output tail must be present");
    }
}
