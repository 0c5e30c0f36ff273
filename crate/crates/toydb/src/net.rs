//! Unix socket plumbing shared by the three servers.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::io;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::Path;
use std::time::Duration;

/// Binaries start in dependency order but race their peers; retry until
/// the downstream socket answers.
pub fn connect_retry(path: &Path) -> io::Result<UnixStream> {
    let mut last = io::Error::new(io::ErrorKind::NotFound, "socket never appeared");
    for _ in 0..500 {
        match UnixStream::connect(path) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    Err(last)
}

pub fn bind_fresh(path: &Path) -> io::Result<UnixListener> {
    let _ = std::fs::remove_file(path);
    UnixListener::bind(path)
}

/// Short stable digest of a payload, for busy markers and logs.
pub fn payload_digest(payload: &[u8]) -> String {
    let mut h = DefaultHasher::new();
    h.write(payload);
    format!("{:016x}", h.finish())
}
