//! Length-prefixed frames over Unix sockets.
//!
//! Layout: one tag byte, eight ASCII digits of payload length, payload.
//!
//!   Q  SQL statement, client -> gateway -> query
//!   P  canonical statement, query -> storage
//!   R  success payload (CSV rows or a status line)
//!   E  error message
//!   C  control command (`ping`, `drop`)
//!   X  shutdown request, propagated downstream
//!
//! Payloads are raw bytes at this layer; UTF-8 validation is the
//! gateway's job so it can answer garbage with a proper error frame.

use std::io::{self, Read, Write};

pub const MAX_PAYLOAD: usize = 1 << 20;

pub const TAG_QUERY: u8 = b'Q';
pub const TAG_PLAN: u8 = b'P';
pub const TAG_RESULT: u8 = b'R';
pub const TAG_ERROR: u8 = b'E';
pub const TAG_CONTROL: u8 = b'C';
pub const TAG_SHUTDOWN: u8 = b'X';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: u8, payload: impl Into<Vec<u8>>) -> Frame {
        Frame { tag, payload: payload.into() }
    }

    pub fn result(text: impl Into<Vec<u8>>) -> Frame {
        Frame::new(TAG_RESULT, text)
    }

    pub fn error(text: impl Into<Vec<u8>>) -> Frame {
        Frame::new(TAG_ERROR, text)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame payload too large"));
    }
    let mut head = [0u8; 9];
    head[0] = frame.tag;
    head[1..].copy_from_slice(format!("{:08}", frame.payload.len()).as_bytes());
    w.write_all(&head)?;
    w.write_all(&frame.payload)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read) -> io::Result<Frame> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head)?;
    let tag = head[0];
    let mut len = 0usize;
    for &d in &head[1..] {
        if !d.is_ascii_digit() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "malformed frame length"));
        }
        len = len * 10 + (d - b'0') as usize;
    }
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame payload too large"));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Frame { tag, payload })
}

/// Send one frame and read one reply on the same stream.
pub fn round_trip(stream: &mut (impl Read + Write), frame: &Frame) -> io::Result<Frame> {
    write_frame(stream, frame)?;
    read_frame(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_through_a_buffer() {
        let f = Frame::new(TAG_QUERY, "SELECT 1".as_bytes());
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        assert_eq!(&buf[..9], b"Q00000008");
        let back = read_frame(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn oversized_and_malformed_frames_are_rejected() {
        let f = Frame::new(TAG_QUERY, vec![0u8; MAX_PAYLOAD + 1]);
        assert!(write_frame(&mut Vec::new(), &f).is_err());
        let bad = b"Q0000x001ignored".to_vec();
        assert!(read_frame(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn empty_payload_frames_work() {
        let f = Frame::new(TAG_SHUTDOWN, Vec::new());
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 9);
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), f);
    }
}
