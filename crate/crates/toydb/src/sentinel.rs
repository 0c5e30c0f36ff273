//! Process-side observability: synthetic call-frame stack, fault records,
//! process census and busy markers.
//!
//! The supervisor outside has no debugger attachment; every toydb process
//! cooperates instead. Instrumented functions push a frame on entry (RAII
//! pop), so a deliberate fault can persist a faithful stack before raising
//! the real signal. Startup writes a census entry so the supervisor sees
//! every member of the process tree, including forked workers, before any
//! of them can die unobserved.
//!
//! Environment contract:
//!   TOYDB_FAULT_DIR   where fault records are written (optional)
//!   TOYDB_CENSUS_DIR  where census entries and busy markers live (optional)
//!   TOYDB_FAULT_MODE  "raise" (default) or "panic" for in-process tests

use std::cell::RefCell;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

pub const ENV_FAULT_DIR: &str = "TOYDB_FAULT_DIR";
pub const ENV_CENSUS_DIR: &str = "TOYDB_CENSUS_DIR";
pub const ENV_FAULT_MODE: &str = "TOYDB_FAULT_MODE";

thread_local! {
    static FRAMES: RefCell<Vec<&'static str>> = const { RefCell::new(Vec::new()) };
}

/// RAII frame marker. `frame("toydb-storage!st_insert")` at function entry.
pub struct FrameGuard;

pub fn frame(name: &'static str) -> FrameGuard {
    FRAMES.with(|f| f.borrow_mut().push(name));
    FrameGuard
}

impl Drop for FrameGuard {
    fn drop(&mut self) {
        FRAMES.with(|f| {
            f.borrow_mut().pop();
        });
    }
}

/// Current synthetic stack, innermost frame first.
pub fn current_frames() -> Vec<String> {
    FRAMES.with(|f| f.borrow().iter().rev().map(|s| s.to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    Segv,
    Abort,
}

impl FaultKind {
    pub fn signal_name(self) -> &'static str {
        match self {
            FaultKind::Segv => "SIGSEGV",
            FaultKind::Abort => "SIGABRT",
        }
    }
}

fn epoch_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn fault_dir() -> Option<PathBuf> {
    std::env::var_os(ENV_FAULT_DIR).map(PathBuf::from)
}

fn census_dir() -> Option<PathBuf> {
    std::env::var_os(ENV_CENSUS_DIR).map(PathBuf::from)
}

/// Persist a fault record: who, what signal, where (frames). Best effort;
/// a record that cannot be written must not mask the fault itself.
fn write_fault_record(binary: &str, kind: FaultKind, detail: &str) {
    let Some(dir) = fault_dir() else { return };
    let pid = std::process::id();
    let mut body = String::new();
    body.push_str(&format!("binary {binary}\n"));
    body.push_str(&format!("pid {pid}\n"));
    body.push_str(&format!("signal {}\n", kind.signal_name()));
    body.push_str(&format!("detail {detail}\n"));
    body.push_str(&format!("epoch {}\n", epoch_secs()));
    // approximate fault context: no debugger, so record the site and the
    // current stack extent instead of machine registers
    let probe = 0u8;
    body.push_str(&format!("sp {:#x}\n", &probe as *const u8 as usize));
    body.push_str("frames\n");
    for f in current_frames() {
        body.push_str(&f);
        body.push('\n');
    }
    let tmp = dir.join(format!(".{binary}-{pid}.fault.tmp"));
    let fin = dir.join(format!("{binary}-{pid}.fault"));
    if fs::write(&tmp, body).is_ok() {
        let _ = fs::rename(&tmp, &fin);
    }
}

/// Deliberate fault: persist the record, then die by the real signal.
/// Under TOYDB_FAULT_MODE=panic the process panics instead so in-process
/// regression tests can observe the fault site with catch_unwind.
pub fn crash(binary: &str, kind: FaultKind, detail: &str) -> ! {
    write_fault_record(binary, kind, detail);
    let _ = writeln!(std::io::stderr(), "fatal ({binary}): {detail}");
    if std::env::var(ENV_FAULT_MODE).as_deref() == Ok("panic") {
        panic!("planted fault: {detail}");
    }
    match kind {
        FaultKind::Segv => unsafe {
            // the runtime hooks SIGSEGV for stack-overflow detection and
            // its handler ignores a raised (non-fault) signal; restore the
            // default action so the process really dies by signal
            libc::signal(libc::SIGSEGV, libc::SIG_DFL);
            libc::raise(libc::SIGSEGV);
        },
        FaultKind::Abort => unsafe {
            libc::abort();
        },
    }
    // raise returning means the signal was somehow ignored; die anyway
    std::process::exit(70);
}

/// Announce this process to the supervisor. Called at startup and by
/// forked workers before they do any work.
pub fn register_process(binary: &str, role: &str) {
    let Some(dir) = census_dir() else { return };
    let pid = std::process::id();
    let ppid = unsafe { libc::getppid() };
    let body = format!(
        "binary {binary}\npid {pid}\nppid {ppid}\nrole {role}\nepoch {}\n",
        epoch_secs()
    );
    let _ = fs::write(dir.join(format!("{pid}.proc")), body);
}

/// Mark this process busy on one request; the supervisor uses the marker
/// to attribute timeouts to the deepest busy process. The marker clears
/// on drop, so a killed process leaves its marker behind as evidence.
pub struct BusyGuard;

pub fn busy_begin(binary: &str, digest: &str) -> BusyGuard {
    if let Some(dir) = census_dir() {
        let pid = std::process::id();
        let _ = fs::write(dir.join(format!("{pid}.busy")), format!("{binary} {digest}\n"));
    }
    BusyGuard
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        if let Some(dir) = census_dir() {
            let pid = std::process::id();
            let _ = fs::remove_file(dir.join(format!("{pid}.busy")));
        }
    }
}

/// Losing a downstream dependency is a cascade death, not an anomaly:
/// log a marker the supervisor recognizes and exit with the dedicated
/// status.
pub const DEP_LOST_EXIT: i32 = 3;

pub fn dep_lost(binary: &str, dep: &str) -> ! {
    let _ = writeln!(std::io::stderr(), "DEP_LOST {binary} -> {dep}");
    std::process::exit(DEP_LOST_EXIT);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_nest_and_unwind() {
        assert!(current_frames().is_empty());
        let _a = frame("bin!outer");
        {
            let _b = frame("bin!inner");
            assert_eq!(current_frames(), vec!["bin!inner".to_string(), "bin!outer".to_string()]);
        }
        assert_eq!(current_frames(), vec!["bin!outer".to_string()]);
    }
}
