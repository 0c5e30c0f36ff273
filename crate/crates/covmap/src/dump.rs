//! Snapshot interchange format.
//!
//! A dumped snapshot is a fixed 16-byte ASCII header followed by the raw
//! counter bytes: `COVSNAPv1 NNNNN\n` where NNNNN is the zero-padded
//! decimal counter count. The fixed width keeps the payload offset
//! constant for every reader.

use crate::error::CovError;

const HEADER_LEN: usize = 16;
const MAX_COUNTERS: usize = 99_999;

/// Serialize counter bytes into the dump format.
pub fn render_snapshot(counters: &[u8]) -> Result<Vec<u8>, CovError> {
    if counters.len() > MAX_COUNTERS {
        return Err(CovError::DumpTooLarge(counters.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + counters.len());
    out.extend_from_slice(format!("COVSNAPv1 {:05}\n", counters.len()).as_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    out.extend_from_slice(counters);
    Ok(out)
}

/// Parse a dump back into counter bytes.
pub fn parse_snapshot(bytes: &[u8]) -> Result<Vec<u8>, CovError> {
    if bytes.len() < HEADER_LEN {
        return Err(CovError::DumpFormat("shorter than header".into()));
    }
    let header = std::str::from_utf8(&bytes[..HEADER_LEN])
        .map_err(|_| CovError::DumpFormat("header is not ASCII".into()))?;
    let Some(rest) = header.strip_prefix("COVSNAPv1 ") else {
        return Err(CovError::DumpFormat("bad magic".into()));
    };
    let Some(digits) = rest.strip_suffix('\n') else {
        return Err(CovError::DumpFormat("header not newline-terminated".into()));
    };
    if digits.len() != 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CovError::DumpFormat("length field must be 5 decimal digits".into()));
    }
    let len: usize = digits.parse().expect("digits checked");
    if bytes.len() - HEADER_LEN != len {
        return Err(CovError::DumpFormat(format!(
            "payload is {} bytes, header says {len}",
            bytes.len() - HEADER_LEN
        )));
    }
    Ok(bytes[HEADER_LEN..].to_vec())
}
