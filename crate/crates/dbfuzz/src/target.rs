//! Target lifecycle: spawning the process group, the persistent client
//! connection, per-case execution, and post-mortem evidence collection.
//!
//! One [`Session`] owns the shared coverage region for the whole campaign
//! and a numbered incarnation of the target (fresh socket/census/fault
//! dirs per launch, so evidence never bleeds across restarts). Targets
//! are spawned dependency-first; each process attaches to its own layout
//! window through the environment handshake and retries its upstream
//! connection itself, so readiness is just "the client socket answers a
//! ping".

use std::collections::BTreeSet;
use std::os::unix::net::UnixStream;
use std::os::unix::process::ExitStatusExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use covmap::{CoverageRegion, CoverageSnapshot, ENV_BINARY, ENV_REGION};

use crate::config::Config;
use crate::error::FuzzError;
use crate::proto;
use crate::rings::{pump, OutputRing};
use crate::supervise::{
    self, attribute_stall, read_busy_markers, read_census, scan_fault_records, signal_name, FaultRecord,
};

const LAUNCH_DEADLINE: Duration = Duration::from_secs(10);
const SETTLE_DEADLINE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub bindir: PathBuf,
    /// Spawn order, dependency first; last entry owns the client socket.
    pub binaries: Vec<String>,
    pub client_sock: String,
}

impl TargetSpec {
    pub fn from_config(cfg: &Config) -> TargetSpec {
        TargetSpec {
            bindir: cfg.bindir.clone(),
            binaries: cfg.binaries.clone(),
            client_sock: cfg.client_sock.clone(),
        }
    }
}

struct ChildProc {
    name: String,
    child: Child,
    ring: OutputRing,
}

struct RunDirs {
    sock: PathBuf,
    census: PathBuf,
    fault: PathBuf,
}

pub struct Session {
    spec: TargetSpec,
    region: CoverageRegion,
    root: PathBuf,
    incarnation: u32,
    dirs: Option<RunDirs>,
    children: Vec<ChildProc>,
    client: Option<UnixStream>,
}

/// What happened to one test case.
#[derive(Debug)]
pub enum CaseStatus {
    Ok,
    /// A target process died by signal; evidence attached.
    Crash {
        binary: String,
        pid: u32,
        signal: String,
        frames: Vec<String>,
        detail: String,
        sp: String,
    },
    /// The case stalled past its deadline; attributed to the deepest busy
    /// process (killed, not unwound).
    Timeout { binary: String, pid: u32, detail: String },
    /// The connection died without any crash evidence.
    ConnectionLost,
}

#[derive(Debug)]
pub struct CaseOutcome {
    pub status: CaseStatus,
    pub snapshot: CoverageSnapshot,
    pub duration: Duration,
    pub log_tail: Vec<u8>,
    /// Statements that got a reply before the case ended.
    pub replies: usize,
}

impl CaseStatus {
    pub fn is_anomaly(&self) -> bool {
        matches!(self, CaseStatus::Crash { .. } | CaseStatus::Timeout { .. })
    }
}

impl Session {
    pub fn create(spec: TargetSpec, layout: &blockplan::GlobalLayout) -> Result<Session, FuzzError> {
        for b in &spec.binaries {
            if layout.window(b).is_none() {
                return Err(FuzzError::Target(format!("binary {b} has no window in the layout")));
            }
        }
        let region = CoverageRegion::create(layout)?;
        let root = std::env::temp_dir().join(format!("dbfuzz-{}-{}", std::process::id(), region.name()));
        std::fs::create_dir_all(&root)?;
        Ok(Session { spec, region, root, incarnation: 0, dirs: None, children: Vec::new(), client: None })
    }

    pub fn region(&self) -> &CoverageRegion {
        &self.region
    }

    pub fn fault_dir(&self) -> Option<&Path> {
        self.dirs.as_ref().map(|d| d.fault.as_path())
    }

    /// Spawn a fresh incarnation of the whole target. Any previous
    /// incarnation must already be dead (see [`Session::kill_all`]).
    pub fn launch(&mut self) -> Result<(), FuzzError> {
        self.kill_all();
        self.incarnation += 1;
        let run = self.root.join(format!("run-{}", self.incarnation));
        let dirs = RunDirs { sock: run.join("sock"), census: run.join("census"), fault: run.join("fault") };
        std::fs::create_dir_all(&dirs.sock)?;
        std::fs::create_dir_all(&dirs.census)?;
        std::fs::create_dir_all(&dirs.fault)?;

        for name in &self.spec.binaries.clone() {
            let ring = OutputRing::new();
            let mut child = Command::new(self.spec.bindir.join(name))
                .env(ENV_REGION, self.region.name())
                .env(ENV_BINARY, name)
                .env(supervise::ENV_SOCK_DIR, &dirs.sock)
                .env(supervise::ENV_CENSUS_DIR, &dirs.census)
                .env(supervise::ENV_FAULT_DIR, &dirs.fault)
                .env_remove(supervise::ENV_FAULT_MODE)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .stderr(Stdio::piped())
                .spawn()
                .map_err(|e| FuzzError::Target(format!("spawn {name}: {e}")))?;
            if let Some(out) = child.stdout.take() {
                pump(out, ring.clone());
            }
            if let Some(err) = child.stderr.take() {
                pump(err, ring.clone());
            }
            self.children.push(ChildProc { name: name.clone(), child, ring });
        }
        self.dirs = Some(dirs);

        match self.wait_ready() {
            Ok(client) => {
                self.client = Some(client);
                Ok(())
            }
            Err(e) => {
                let tail = String::from_utf8_lossy(&self.log_tail()).into_owned();
                self.kill_all();
                Err(FuzzError::Target(format!("target not ready: {e}; output: {}", tail.trim())))
            }
        }
    }

    fn wait_ready(&mut self) -> Result<UnixStream, String> {
        let sock = self.dirs.as_ref().unwrap().sock.join(&self.spec.client_sock);
        let deadline = Instant::now() + LAUNCH_DEADLINE;
        let mut stream = loop {
            match UnixStream::connect(&sock) {
                Ok(s) => break s,
                Err(e) => {
                    if let Some(dead) = self.any_child_dead() {
                        return Err(format!("{dead} exited during launch"));
                    }
                    if Instant::now() >= deadline {
                        return Err(format!("connect {}: {e}", sock.display()));
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
            }
        };
        stream
            .set_read_timeout(Some(Duration::from_secs(2)))
            .map_err(|e| format!("set timeout: {e}"))?;
        loop {
            let ping = proto::send_frame(&mut stream, proto::TAG_CONTROL, b"ping")
                .and_then(|()| proto::read_reply(&mut stream));
            match ping {
                Ok(reply) if reply.tag == proto::TAG_RESULT => return Ok(stream),
                Ok(reply) => return Err(format!("ping answered with tag {}", reply.tag as char)),
                Err(e) => {
                    if Instant::now() >= deadline {
                        return Err(format!("ping: {e}"));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
            }
        }
    }

    fn any_child_dead(&mut self) -> Option<String> {
        for c in &mut self.children {
            if let Ok(Some(_)) = c.child.try_wait() {
                return Some(c.name.clone());
            }
        }
        None
    }

    pub fn child_pid(&self, name: &str) -> Option<u32> {
        self.children.iter().find(|c| c.name == name).map(|c| c.child.id())
    }

    /// Execute one case against the live target: reset counters, send each
    /// statement, classify whatever interrupts the conversation.
    pub fn run_case(&mut self, statements: &[String], stmt_timeout: Duration, case_timeout: Duration) -> CaseOutcome {
        let start = Instant::now();
        let deadline = start + case_timeout;
        self.region.reset();
        let mut replies = 0usize;
        let mut sent: Vec<String> = Vec::new();

        for stmt in statements {
            let stmt = stmt.trim();
            if stmt.is_empty() {
                continue;
            }
            sent.push(stmt.to_string());
            if stmt.len() > proto::MAX_PAYLOAD {
                // cannot be framed; skip rather than kill the conversation
                continue;
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return self.finish_stalled(start, &sent, replies, "case budget exhausted");
            }
            let status = self.exchange(stmt, stmt_timeout.min(remaining));
            match status {
                Exchange::Replied => replies += 1,
                Exchange::Stalled => {
                    return self.finish_stalled(start, &sent, replies, "statement deadline exceeded");
                }
                Exchange::Lost => {
                    return self.finish_lost(start, &sent, replies);
                }
            }
        }
        CaseOutcome {
            status: CaseStatus::Ok,
            snapshot: self.region.snapshot(),
            duration: start.elapsed(),
            log_tail: self.log_tail(),
            replies,
        }
    }

    /// Ask the target to clear all database state.
    pub fn drop_database(&mut self, timeout: Duration) -> Result<(), FuzzError> {
        let Some(client) = self.client.as_mut() else {
            return Err(FuzzError::Target("no client connection".into()));
        };
        client.set_read_timeout(Some(timeout)).ok();
        proto::send_frame(client, proto::TAG_CONTROL, b"drop")
            .and_then(|()| proto::read_reply(client))
            .map(|_| ())
            .map_err(|e| FuzzError::Target(format!("drop: {e}")))
    }

    fn exchange(&mut self, stmt: &str, timeout: Duration) -> Exchange {
        let Some(client) = self.client.as_mut() else { return Exchange::Lost };
        if client.set_read_timeout(Some(timeout.max(Duration::from_millis(1)))).is_err() {
            return Exchange::Lost;
        }
        if proto::send_frame(client, proto::TAG_QUERY, stmt.as_bytes()).is_err() {
            return Exchange::Lost;
        }
        match proto::read_reply(client) {
            Ok(_) => Exchange::Replied,
            Err(e) if proto::is_timeout(&e) => Exchange::Stalled,
            Err(_) => Exchange::Lost,
        }
    }

    fn finish_stalled(&mut self, start: Instant, sent: &[String], replies: usize, why: &str) -> CaseOutcome {
        let dirs = self.dirs.as_ref().unwrap();
        let busy = read_busy_markers(&dirs.census).unwrap_or_default();
        let census = read_census(&dirs.census).unwrap_or_default();
        let attributed = attribute_stall(&busy, &census, &self.spec.binaries);
        // the client-facing process is the fallback culprit
        let (binary, pid) = match attributed {
            Some(m) => (m.binary, m.pid),
            None => {
                let name = self.spec.binaries.last().cloned().unwrap_or_default();
                let pid = self.child_pid(&name).unwrap_or(0);
                (name, pid)
            }
        };
        self.kill_all();
        CaseOutcome {
            status: CaseStatus::Timeout { binary, pid, detail: why.to_string() },
            snapshot: self.region.snapshot(),
            duration: start.elapsed(),
            log_tail: self.log_tail_of(sent, replies),
            replies,
        }
    }

    fn finish_lost(&mut self, start: Instant, sent: &[String], replies: usize) -> CaseOutcome {
        let exits = self.settle();
        let records = self
            .fault_dir()
            .map(|d| scan_fault_records(d).unwrap_or_default())
            .unwrap_or_default();
        let status = classify_loss(&records, &exits);
        let snapshot = self.region.snapshot();
        self.kill_all();
        CaseOutcome {
            status,
            snapshot,
            duration: start.elapsed(),
            log_tail: self.log_tail_of(sent, replies),
            replies,
        }
    }

    /// Reap exits for a grace period after a lost connection, so cascading
    /// shutdowns finish before evidence is read.
    fn settle(&mut self) -> Vec<(String, u32, ExitStatus)> {
        let deadline = Instant::now() + SETTLE_DEADLINE;
        let mut exits: Vec<(String, u32, ExitStatus)> = Vec::new();
        let mut last_progress = Instant::now();
        loop {
            for c in &mut self.children {
                if exits.iter().any(|(_, pid, _)| *pid == c.child.id()) {
                    continue;
                }
                if let Ok(Some(status)) = c.child.try_wait() {
                    exits.push((c.name.clone(), c.child.id(), status));
                    last_progress = Instant::now();
                }
            }
            // cascades arrive staggered; stop only after a quiet window
            let quiet = last_progress.elapsed() > Duration::from_millis(200);
            if (quiet && !exits.is_empty()) || Instant::now() >= deadline {
                break;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        exits
    }

    pub fn kill_all(&mut self) {
        self.client = None;
        for c in &mut self.children {
            let _ = c.child.kill();
            let _ = c.child.wait();
        }
        self.children.clear();
    }

    /// Best-effort clean shutdown: one X frame, then the hammer.
    pub fn shutdown(&mut self) {
        if let Some(client) = self.client.as_mut() {
            client.set_read_timeout(Some(Duration::from_millis(500))).ok();
            let _ = proto::send_frame(client, proto::TAG_SHUTDOWN, b"");
            let _ = proto::read_reply(client);
        }
        for c in &mut self.children {
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if matches!(c.child.try_wait(), Ok(Some(_))) {
                    break;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
        self.kill_all();
    }

    pub fn log_tail(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.children {
            out.extend_from_slice(format!("--- {} ---\n", c.name).as_bytes());
            out.extend_from_slice(&c.ring.contents());
            out.push(b'\n');
        }
        out
    }

    fn log_tail_of(&self, sent: &[String], replies: usize) -> Vec<u8> {
        let mut out = self.log_tail();
        out.extend_from_slice(
            format!("--- client ---\nstatements sent {} replied {}\n", sent.len(), replies).as_bytes(),
        );
        out
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.kill_all();
        let _ = std::fs::remove_dir_all(&self.root);
    }
}

enum Exchange {
    Replied,
    Stalled,
    Lost,
}

/// Decide what a lost connection actually was, from fault records first
/// and raw wait statuses second. Cascade exits are never the culprit.
fn classify_loss(records: &[FaultRecord], exits: &[(String, u32, ExitStatus)]) -> CaseStatus {
    if let Some(rec) = records.first() {
        return CaseStatus::Crash {
            binary: rec.binary.clone(),
            pid: rec.pid,
            signal: rec.signal.clone(),
            frames: rec.frames.clone(),
            detail: rec.detail.clone(),
            sp: rec.sp.clone(),
        };
    }
    for (name, pid, status) in exits {
        if let Some(sig) = status.signal() {
            // no record: the process died without its own fault handler
            // running, so only an address-less pseudo frame is available
            return CaseStatus::Crash {
                binary: name.clone(),
                pid: *pid,
                signal: signal_name(sig),
                frames: vec![format!("{name}!0x0")],
                detail: "terminated by signal without fault record".to_string(),
                sp: String::new(),
            };
        }
    }
    CaseStatus::ConnectionLost
}

/// Indices of counters that are nonzero in `snapshot`.
pub fn covered_set(counters: &[u8]) -> BTreeSet<u64> {
    counters
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .map(|(i, _)| i as u64)
        .collect()
}
