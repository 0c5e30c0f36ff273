//! Cooperative supervision of target processes through filesystem
//! evidence: census rows, busy markers, and fault records.
//!
//! The contract (implemented by the bundled toy target): each process
//! registers a `<pid>.proc` row in the census dir at startup, drops a
//! `<pid>.busy` marker while handling a request (removed when done, so a
//! killed process leaves its marker behind), and writes a
//! `<binary>-<pid>.fault` record before dying from a planted fault. A
//! process that exits with [`CASCADE_EXIT`] died because a dependency went
//! away, not because of its own bug, and is never attributed an anomaly.

use std::collections::HashMap;
use std::io;
use std::path::Path;

/// Environment variable names of the supervision contract. The values are
/// target-family specific; the bundled target reads exactly these.
pub const ENV_SOCK_DIR: &str = "TOYDB_SOCK_DIR";
pub const ENV_CENSUS_DIR: &str = "TOYDB_CENSUS_DIR";
pub const ENV_FAULT_DIR: &str = "TOYDB_FAULT_DIR";
/// Set by test harnesses to turn planted faults into panics; must never
/// leak into processes the fuzzer spawns.
pub const ENV_FAULT_MODE: &str = "TOYDB_FAULT_MODE";

/// Exit code a target process uses for "my dependency died".
pub const CASCADE_EXIT: i32 = 3;

/// A target-written record of a fault, parsed from `<binary>-<pid>.fault`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    pub binary: String,
    pub pid: u32,
    pub signal: String,
    pub detail: String,
    pub epoch: u64,
    /// Stack-extent probe recorded at the fault site (no debugger).
    pub sp: String,
    /// Innermost-first `binary!symbol` frames.
    pub frames: Vec<String>,
}

pub fn parse_fault_record(text: &str) -> Option<FaultRecord> {
    let mut rec = FaultRecord {
        binary: String::new(),
        pid: 0,
        signal: String::new(),
        detail: String::new(),
        epoch: 0,
        sp: String::new(),
        frames: Vec::new(),
    };
    let mut in_frames = false;
    for line in text.lines() {
        if in_frames {
            if !line.is_empty() {
                rec.frames.push(line.to_string());
            }
            continue;
        }
        match line.split_once(' ') {
            Some(("binary", v)) => rec.binary = v.to_string(),
            Some(("pid", v)) => rec.pid = v.parse().ok()?,
            Some(("signal", v)) => rec.signal = v.to_string(),
            Some(("detail", v)) => rec.detail = v.to_string(),
            Some(("epoch", v)) => rec.epoch = v.parse().ok()?,
            Some(("sp", v)) => rec.sp = v.to_string(),
            _ => {}
        }
        if line == "frames" {
            in_frames = true;
        }
    }
    if rec.binary.is_empty() || rec.pid == 0 || rec.signal.is_empty() {
        return None;
    }
    Some(rec)
}

/// All fault records in `dir`, ordered by (epoch, pid) so the earliest
/// fault of a cascade comes first.
pub fn scan_fault_records(dir: &Path) -> io::Result<Vec<FaultRecord>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if !name.ends_with(".fault") || name.starts_with('.') {
            continue;
        }
        if let Ok(text) = std::fs::read_to_string(entry.path()) {
            if let Some(rec) = parse_fault_record(&text) {
                out.push(rec);
            }
        }
    }
    out.sort_by(|a, b| (a.epoch, a.pid).cmp(&(b.epoch, b.pid)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusRow {
    pub pid: u32,
    pub binary: String,
    pub role: String,
}

pub fn read_census(dir: &Path) -> io::Result<Vec<CensusRow>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if !name.ends_with(".proc") {
            continue;
        }
        let Ok(text) = std::fs::read_to_string(entry.path()) else { continue };
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(' ') {
                fields.insert(k, v);
            }
        }
        let (Some(pid), Some(binary)) = (fields.get("pid"), fields.get("binary")) else { continue };
        let Ok(pid) = pid.parse() else { continue };
        out.push(CensusRow {
            pid,
            binary: binary.to_string(),
            role: fields.get("role").unwrap_or(&"").to_string(),
        });
    }
    out.sort_by_key(|r| r.pid);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusyMarker {
    pub pid: u32,
    pub binary: String,
    pub digest: String,
}

/// `<pid>.busy` markers: processes currently (or terminally) inside a
/// request. Content is `<binary> <request-digest>`.
pub fn read_busy_markers(dir: &Path) -> io::Result<Vec<BusyMarker>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let Some(stem) = name.strip_suffix(".busy") else { continue };
        let Ok(pid) = stem.parse() else { continue };
        let Ok(text) = std::fs::read_to_string(entry.path()) else { continue };
        let mut parts = text.split_whitespace();
        let Some(binary) = parts.next() else { continue };
        out.push(BusyMarker {
            pid,
            binary: binary.to_string(),
            digest: parts.next().unwrap_or("").to_string(),
        });
    }
    out.sort_by_key(|m| m.pid);
    Ok(out)
}

pub fn pid_alive(pid: u32) -> bool {
    unsafe { libc::kill(pid as libc::pid_t, 0) == 0 }
}

/// Attribute a stalled case to the deepest busy process.
///
/// Depth follows `spawn_order`: targets spawn dependency-first, so the
/// earliest spawn-order binary that is both alive (per the census) and
/// busy is the one actually sitting on the request; everything upstream is
/// merely waiting for it.
pub fn attribute_stall(
    busy: &[BusyMarker],
    census: &[CensusRow],
    spawn_order: &[String],
) -> Option<BusyMarker> {
    let live: Vec<&CensusRow> = census.iter().filter(|r| pid_alive(r.pid)).collect();
    let mut best: Option<(usize, &BusyMarker)> = None;
    for m in busy {
        if !live.iter().any(|r| r.pid == m.pid) {
            continue;
        }
        let Some(depth) = spawn_order.iter().position(|b| *b == m.binary) else { continue };
        if best.map_or(true, |(d, _)| depth < d) {
            best = Some((depth, m));
        }
    }
    best.map(|(_, m)| m.clone())
}

/// Human name for a raw termination signal number.
pub fn signal_name(sig: i32) -> String {
    match sig {
        libc::SIGSEGV => "SIGSEGV".into(),
        libc::SIGABRT => "SIGABRT".into(),
        libc::SIGBUS => "SIGBUS".into(),
        libc::SIGILL => "SIGILL".into(),
        libc::SIGFPE => "SIGFPE".into(),
        libc::SIGKILL => "SIGKILL".into(),
        libc::SIGTERM => "SIGTERM".into(),
        other => format!("SIG{other}"),
    }
}
