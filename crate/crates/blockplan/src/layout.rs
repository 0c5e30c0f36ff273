//! Linked coverage layout over multiple binaries.
//!
//! Each binary gets a contiguous window in one shared counter region.
//! Window lengths are the binary's counter count rounded up to
//! [`ALIGNMENT`], windows are laid out back to back in ascending binary id
//! order, so they partition [0, totalLength) exactly. The layout is
//! serialized so every process and the analyzer agree on it bit for bit.

use crate::error::PlanError;

/// Window length quantum in counters. Keeps counters of different
/// binaries out of each other's cache lines.
pub const ALIGNMENT: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    pub binary_id: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalLayout {
    /// Entries sorted by binary id; offsets ascend in the same order.
    pub entries: Vec<LayoutEntry>,
    /// Total region length in counters; equals the sum of window lengths.
    pub total_length: u64,
}

impl GlobalLayout {
    pub fn window(&self, binary_id: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.binary_id == binary_id)
    }

    /// Binary whose window contains an absolute counter index.
    pub fn owner(&self, index: u64) -> Option<&LayoutEntry> {
        self.entries
            .iter()
            .find(|e| index >= e.offset && index < e.offset + e.length)
    }
}

fn align_up(n: u64) -> u64 {
    n.div_ceil(ALIGNMENT) * ALIGNMENT
}

/// Link per-binary counter counts into one global layout.
pub fn link_layouts(per_binary: &[(String, u64)]) -> Result<GlobalLayout, PlanError> {
    let mut sorted: Vec<(String, u64)> = per_binary.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in sorted.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(PlanError::DuplicateBinary { binary: pair[0].0.clone() });
        }
    }
    let mut entries = Vec::with_capacity(sorted.len());
    let mut offset = 0u64;
    for (binary_id, counters) in sorted {
        let length = align_up(counters);
        entries.push(LayoutEntry { binary_id, offset, length });
        offset += length;
    }
    Ok(GlobalLayout { entries, total_length: offset })
}

/// Serialize a layout to its interchange text form.
pub fn render_layout(layout: &GlobalLayout) -> String {
    let mut out = format!("layout v1 total {}\n", layout.total_length);
    for e in &layout.entries {
        out.push_str(&format!("{} {} {}\n", e.binary_id, e.offset, e.length));
    }
    out
}

/// Parse the interchange text form back into a layout.
pub fn parse_layout(text: &str) -> Result<GlobalLayout, PlanError> {
    let fmt = |line: usize, msg: &str| PlanError::LayoutFormat { line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| fmt(1, "empty document"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let total_length = match head.as_slice() {
        ["layout", "v1", "total", n] => n.parse::<u64>().map_err(|_| fmt(1, "bad total"))?,
        _ => return Err(fmt(1, "bad header")),
    };
    let mut entries = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [binary_id, offset, length] = parts.as_slice() else {
            return Err(fmt(i + 1, "expected `<binary> <offset> <length>`"));
        };
        entries.push(LayoutEntry {
            binary_id: binary_id.to_string(),
            offset: offset.parse().map_err(|_| fmt(i + 1, "bad offset"))?,
            length: length.parse().map_err(|_| fmt(i + 1, "bad length"))?,
        });
    }
    let layout = GlobalLayout { entries, total_length };
    verify_layout(&layout)?;
    Ok(layout)
}

/// Structural invariants: ids strictly ascending, window lengths aligned,
/// windows back to back from 0, total equal to the last window end.
pub fn verify_layout(layout: &GlobalLayout) -> Result<(), PlanError> {
    let fmt = |msg: String| PlanError::LayoutFormat { line: 0, msg };
    let mut end = 0u64;
    let mut prev_id: Option<&str> = None;
    for e in &layout.entries {
        if let Some(p) = prev_id {
            if p >= e.binary_id.as_str() {
                return Err(fmt(format!("binary ids out of order at `{}`", e.binary_id)));
            }
        }
        if e.length % ALIGNMENT != 0 {
            return Err(fmt(format!("window `{}` length not a multiple of {ALIGNMENT}", e.binary_id)));
        }
        if e.offset != end {
            return Err(fmt(format!("window `{}` leaves a gap or overlaps its predecessor", e.binary_id)));
        }
        end = e.offset + e.length;
        prev_id = Some(&e.binary_id);
    }
    if end != layout.total_length {
        return Err(fmt(format!("total {} does not match window end {}", layout.total_length, end)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_are_sorted_aligned_and_exhaustive() {
        let l = link_layouts(&[
            ("storage".into(), 10),
            ("gateway".into(), 64),
            ("query".into(), 100),
        ])
        .unwrap();
        assert_eq!(l.entries[0].binary_id, "gateway");
        assert_eq!((l.entries[0].offset, l.entries[0].length), (0, 64));
        assert_eq!(l.entries[1].binary_id, "query");
        assert_eq!((l.entries[1].offset, l.entries[1].length), (64, 128));
        assert_eq!(l.entries[2].binary_id, "storage");
        assert_eq!((l.entries[2].offset, l.entries[2].length), (192, 64));
        assert_eq!(l.total_length, 256);
        assert_eq!(l.owner(63).unwrap().binary_id, "gateway");
        assert_eq!(l.owner(191).unwrap().binary_id, "query");
        assert_eq!(l.owner(192).unwrap().binary_id, "storage");
        assert!(l.owner(256).is_none());
    }

    #[test]
    fn two_small_binaries_get_one_quantum_each() {
        let l = link_layouts(&[("X".into(), 5), ("Y".into(), 3)]).unwrap();
        assert_eq!((l.entries[0].offset, l.entries[0].length), (0, 64));
        assert_eq!((l.entries[1].offset, l.entries[1].length), (64, 64));
        assert_eq!(l.total_length, 128);
    }

    #[test]
    fn single_binary_window_starts_at_zero() {
        let l = link_layouts(&[("only".into(), 130)]).unwrap();
        assert_eq!(l.entries.len(), 1);
        assert_eq!((l.entries[0].offset, l.entries[0].length), (0, 192));
        assert_eq!(l.total_length, 192);
    }

    #[test]
    fn duplicate_binary_is_rejected() {
        let err = link_layouts(&[("a".into(), 1), ("a".into(), 2)]).unwrap_err();
        assert_eq!(err, PlanError::DuplicateBinary { binary: "a".into() });
    }

    #[test]
    fn text_form_round_trips() {
        let l = link_layouts(&[("gw".into(), 7), ("st".into(), 65)]).unwrap();
        let text = render_layout(&l);
        assert_eq!(text, "layout v1 total 192\ngw 0 64\nst 64 128\n");
        assert_eq!(parse_layout(&text).unwrap(), l);
    }

    #[test]
    fn parse_rejects_malformed_documents() {
        assert!(matches!(parse_layout(""), Err(PlanError::LayoutFormat { line: 1, .. })));
        assert!(matches!(
            parse_layout("layout v2 total 0\n"),
            Err(PlanError::LayoutFormat { line: 1, .. })
        ));
        assert!(matches!(
            parse_layout("layout v1 total 64\na 0\n"),
            Err(PlanError::LayoutFormat { line: 2, .. })
        ));
        // unaligned window length
        assert!(parse_layout("layout v1 total 128\na 0 65\nb 64 64\n").is_err());
        // gap between windows
        assert!(parse_layout("layout v1 total 192\na 0 64\nb 128 64\n").is_err());
        // ids out of order
        assert!(parse_layout("layout v1 total 128\nb 0 64\na 64 64\n").is_err());
        // wrong total
        assert!(parse_layout("layout v1 total 100\na 0 64\n").is_err());
    }
}
