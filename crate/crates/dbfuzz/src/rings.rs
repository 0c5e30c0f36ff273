//! Bounded suffix buffers for target process output.
//!
//! Each target process gets one ring fed by pump threads draining its
//! stdout and stderr. Only the last [`RING_CAP`] bytes survive, so a
//! chatty or looping target cannot exhaust fuzzer memory, while the tail
//! that matters for triage is always available.

use std::collections::VecDeque;
use std::io::Read;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub const RING_CAP: usize = 64 * 1024;

#[derive(Clone, Default)]
pub struct OutputRing {
    buf: Arc<Mutex<VecDeque<u8>>>,
}

impl OutputRing {
    pub fn new() -> OutputRing {
        OutputRing::default()
    }

    pub fn push(&self, bytes: &[u8]) {
        let mut buf = self.buf.lock().unwrap();
        // keep only the suffix of oversized writes
        let keep = &bytes[bytes.len().saturating_sub(RING_CAP)..];
        for &b in keep {
            if buf.len() == RING_CAP {
                buf.pop_front();
            }
            buf.push_back(b);
        }
    }

    pub fn contents(&self) -> Vec<u8> {
        let buf = self.buf.lock().unwrap();
        buf.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.buf.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Drain `reader` into `ring` until EOF. The thread parks in `read`, so it
/// exits on its own when the child closes the pipe (including by dying).
pub fn pump(mut reader: impl Read + Send + 'static, ring: OutputRing) -> JoinHandle<()> {
    std::thread::spawn(move || {
        let mut chunk = [0u8; 4096];
        loop {
            match reader.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => ring.push(&chunk[..n]),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_only_the_suffix() {
        let ring = OutputRing::new();
        ring.push(b"hello ");
        ring.push(&vec![b'x'; RING_CAP]);
        let got = ring.contents();
        assert_eq!(got.len(), RING_CAP);
        assert!(got.iter().all(|&b| b == b'x'), "prefix must be evicted");
    }

    #[test]
    fn oversized_single_write_is_truncated_to_tail() {
        let ring = OutputRing::new();
        let mut big = vec![b'a'; RING_CAP];
        big.extend_from_slice(b"tail");
        ring.push(&big);
        let got = ring.contents();
        assert_eq!(got.len(), RING_CAP);
        assert!(got.ends_with(b"tail"));
    }

    #[test]
    fn pump_delivers_stream_contents() {
        let (mut w, r) = std::os::unix::net::UnixStream::pair().unwrap();
        let ring = OutputRing::new();
        let handle = pump(r, ring.clone());
        use std::io::Write;
        w.write_all(b"boot ok\n").unwrap();
        drop(w);
        handle.join().unwrap();
        assert_eq!(ring.contents(), b"boot ok\n");
    }
}
