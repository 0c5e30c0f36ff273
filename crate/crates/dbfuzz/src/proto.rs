//! Client side of the target wire protocol.
//!
//! Frames are a tag byte, an 8-digit ASCII payload length, and the
//! payload. The fuzzer only ever speaks the client half: statements and
//! control verbs out, results and errors back. Read timeouts are set on
//! the socket by the caller; `read_reply` surfaces them as
//! [`std::io::ErrorKind::WouldBlock`]/`TimedOut` so the statement loop can
//! distinguish a stall from a dead connection.

use std::io::{self, Read, Write};
use std::os::unix::net::UnixStream;

pub const MAX_PAYLOAD: usize = 1 << 20;

pub const TAG_QUERY: u8 = b'Q';
pub const TAG_RESULT: u8 = b'R';
pub const TAG_ERROR: u8 = b'E';
pub const TAG_CONTROL: u8 = b'C';
pub const TAG_SHUTDOWN: u8 = b'X';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub tag: u8,
    pub payload: Vec<u8>,
}

impl Reply {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

pub fn send_frame(stream: &mut UnixStream, tag: u8, payload: &[u8]) -> io::Result<()> {
    if payload.len() > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "payload exceeds frame cap"));
    }
    let mut buf = Vec::with_capacity(9 + payload.len());
    buf.push(tag);
    buf.extend_from_slice(format!("{:08}", payload.len()).as_bytes());
    buf.extend_from_slice(payload);
    stream.write_all(&buf)
}

pub fn read_reply(stream: &mut UnixStream) -> io::Result<Reply> {
    let mut head = [0u8; 9];
    read_exact(stream, &mut head)?;
    let len_text = std::str::from_utf8(&head[1..])
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "non-ASCII frame length"))?;
    let len: usize = len_text
        .parse()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad frame length"))?;
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "oversized frame"));
    }
    let mut payload = vec![0u8; len];
    read_exact(stream, &mut payload)?;
    Ok(Reply { tag: head[0], payload })
}

// read_exact that does not mask a timeout as UnexpectedEof after a
// partial read: a frame split across a timeout boundary counts as a stall
fn read_exact(stream: &mut UnixStream, buf: &mut [u8]) -> io::Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed")),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// True when the error is a read-timeout rather than a dead peer.
pub fn is_timeout(err: &io::Error) -> bool {
    matches!(err.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}
