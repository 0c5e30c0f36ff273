//! Shared helpers for tests that run the real three-process target.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::ErrorKind;
use std::os::unix::net::UnixStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command};
use std::time::{Duration, Instant};

use blockplan::{parse_manifest, plan_all, BinaryManifest, GlobalLayout};
use covmap::CoverageRegion;
use toydb::instr::BINARIES;
use toydb::wire::{self, Frame};

pub fn manifests() -> Vec<BinaryManifest> {
    BINARIES
        .iter()
        .map(|b| parse_manifest(toydb::instr::manifest_text(b)).expect("manifest parses"))
        .collect()
}

pub fn toydb_layout() -> GlobalLayout {
    let (_, layout) = plan_all(&manifests()).expect("manifests plan");
    layout
}

/// The test binary lives in target/debug/deps; the toydb binaries are its
/// siblings one level up.
pub fn bin_path(name: &str) -> PathBuf {
    let exe = std::env::current_exe().expect("current exe");
    let debug_dir = exe
        .parent()
        .and_then(Path::parent)
        .expect("target/debug ancestor")
        .to_path_buf();
    let p = debug_dir.join(name);
    assert!(p.exists(), "{} not built at {}", name, p.display());
    p
}

pub struct Trio {
    pub children: Vec<(String, Child)>,
    pub sock_dir: PathBuf,
    pub census_dir: PathBuf,
    pub fault_dir: PathBuf,
    _dirs: tempfile::TempDir,
}

impl Trio {
    /// Spawn storage, query, gateway against `region` and wait until the
    /// readiness ping makes it through the whole chain.
    pub fn spawn(region: &CoverageRegion) -> Trio {
        let dirs = tempfile::tempdir().expect("tempdir");
        let sock_dir = dirs.path().join("sock");
        let census_dir = dirs.path().join("census");
        let fault_dir = dirs.path().join("fault");
        for d in [&sock_dir, &census_dir, &fault_dir] {
            std::fs::create_dir_all(d).expect("mkdir");
        }
        let mut children = Vec::new();
        for name in ["toydb-storage", "toydb-query", "toydb-gateway"] {
            let child = Command::new(bin_path(name))
                .env("COVRT_REGION", region.name())
                .env("COVRT_BINARY", name)
                .env("TOYDB_SOCK_DIR", &sock_dir)
                .env("TOYDB_CENSUS_DIR", &census_dir)
                .env("TOYDB_FAULT_DIR", &fault_dir)
                // faults in real processes must raise real signals even if
                // the test process itself runs in panic mode
                .env_remove("TOYDB_FAULT_MODE")
                .spawn()
                .unwrap_or_else(|e| panic!("spawn {name}: {e}"));
            children.push((name.to_string(), child));
        }
        let trio = Trio {
            children,
            sock_dir,
            census_dir,
            fault_dir,
            _dirs: dirs,
        };
        let mut client = trio.connect_gateway();
        let pong = round_trip_timeout(
            &mut client,
            &Frame::new(wire::TAG_CONTROL, b"ping".to_vec()),
            Duration::from_secs(10),
        )
        .expect("readiness ping");
        assert_eq!(pong.tag, wire::TAG_RESULT, "ping reply: {}", pong.text());
        trio
    }

    pub fn connect_gateway(&self) -> UnixStream {
        connect_retry(&self.sock_dir.join("gw.sock"))
    }

    pub fn connect(&self, sock: &str) -> UnixStream {
        connect_retry(&self.sock_dir.join(sock))
    }

    /// Census: binary name -> pids that registered under it.
    pub fn census(&self) -> HashMap<String, Vec<i32>> {
        let mut out: HashMap<String, Vec<i32>> = HashMap::new();
        for entry in std::fs::read_dir(&self.census_dir).expect("census dir") {
            let path = entry.expect("entry").path();
            if path.extension().and_then(|e| e.to_str()) != Some("proc") {
                continue;
            }
            let text = std::fs::read_to_string(&path).unwrap_or_default();
            let mut binary = None;
            let mut pid = None;
            for line in text.lines() {
                if let Some(rest) = line.strip_prefix("binary ") {
                    binary = Some(rest.to_string());
                }
                if let Some(rest) = line.strip_prefix("pid ") {
                    pid = rest.trim().parse::<i32>().ok();
                }
            }
            if let (Some(b), Some(p)) = (binary, pid) {
                out.entry(b).or_default().push(p);
            }
        }
        out
    }

    /// Wait for one process to exit on its own and return its status.
    pub fn wait_exit(&mut self, name: &str, timeout: Duration) -> std::process::ExitStatus {
        let deadline = Instant::now() + timeout;
        loop {
            for (n, child) in &mut self.children {
                if n == name {
                    if let Some(status) = child.try_wait().expect("try_wait") {
                        return status;
                    }
                }
            }
            assert!(Instant::now() < deadline, "{name} did not exit in time");
            std::thread::sleep(Duration::from_millis(10));
        }
    }

    pub fn pid(&self, name: &str) -> u32 {
        self.children
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.id())
            .unwrap_or_else(|| panic!("no child named {name}"))
    }

    pub fn kill(&mut self, name: &str) {
        for (n, child) in &mut self.children {
            if n == name {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }

    pub fn kill_all(&mut self) {
        for (_, child) in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for Trio {
    fn drop(&mut self) {
        self.kill_all();
    }
}

pub fn connect_retry(path: &Path) -> UnixStream {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match UnixStream::connect(path) {
            Ok(s) => return s,
            Err(e) => {
                if Instant::now() > deadline {
                    panic!("connect {}: {e}", path.display());
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    }
}

pub fn round_trip_timeout(
    stream: &mut UnixStream,
    frame: &Frame,
    timeout: Duration,
) -> std::io::Result<Frame> {
    stream.set_read_timeout(Some(timeout))?;
    wire::write_frame(stream, frame)?;
    wire::read_frame(stream)
}

/// Send one SQL statement through the gateway.
pub fn send_sql(stream: &mut UnixStream, sql: &str) -> std::io::Result<Frame> {
    round_trip_timeout(
        stream,
        &Frame::new(wire::TAG_QUERY, sql.as_bytes().to_vec()),
        Duration::from_secs(10),
    )
}

/// Wait until `pid` is gone (its /proc entry disappears or kill(0) fails).
pub fn wait_pid_gone(pid: i32, timeout: Duration) {
    let deadline = Instant::now() + timeout;
    loop {
        let alive = unsafe { libc::kill(pid, 0) } == 0;
        if !alive || Instant::now() > deadline {
            return;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

/// Read a frame, tolerating a dead peer: returns None on EOF/reset.
pub fn try_round_trip(stream: &mut UnixStream, frame: &Frame) -> Option<Frame> {
    if wire::write_frame(stream, frame).is_err() {
        return None;
    }
    let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
    match wire::read_frame(stream) {
        Ok(f) => Some(f),
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => None,
        Err(_) => None,
    }
}

/// Full gateway -> query -> storage pipeline inside the test process,
/// with a live Database behind it.
pub struct Pipeline {
    chain: Chain,
}

struct Store(pub toydb::catalog::Database);

impl toydb::query::Backend for Store {
    fn round_trip(&mut self, frame: &Frame) -> std::io::Result<Frame> {
        assert_eq!(frame.tag, wire::TAG_PLAN);
        let sql = std::str::from_utf8(&frame.payload).expect("canonical text");
        Ok(toydb::storage::handle_plan(&mut self.0, sql))
    }
}

struct Chain(Store);

impl toydb::query::Backend for Chain {
    fn round_trip(&mut self, frame: &Frame) -> std::io::Result<Frame> {
        assert_eq!(frame.tag, wire::TAG_QUERY);
        let sql = std::str::from_utf8(&frame.payload).expect("sql text");
        match toydb::query::handle_statement(sql, &mut self.0) {
            toydb::query::QyAction::Reply(f) => Ok(f),
            toydb::query::QyAction::DepLost(_) => Err(std::io::Error::other("downstream lost")),
        }
    }
}

impl Pipeline {
    pub fn new() -> Pipeline {
        Pipeline {
            chain: Chain(Store(toydb::catalog::Database::new())),
        }
    }

    /// Drive one raw payload through all three handlers; returns the
    /// gateway's reply.
    pub fn run_raw(&mut self, payload: &[u8]) -> Frame {
        match toydb::gateway::handle_query(payload, &mut self.chain) {
            toydb::gateway::GwAction::Reply(f) => f,
            toydb::gateway::GwAction::DepLost(d) => panic!("pipeline lost {d}"),
        }
    }

    pub fn run(&mut self, sql: &str) -> Frame {
        self.run_raw(sql.as_bytes())
    }
}

impl Default for Pipeline {
    fn default() -> Self {
        Self::new()
    }
}
