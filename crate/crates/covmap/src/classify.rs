//! Novelty classification over hit-count buckets.
//!
//! Counter values collapse into nine buckets: 0, 1, 2, 3, 4-7, 8-15,
//! 16-31, 32-127, 128-255. An input is interesting when some counter's
//! bucket exceeds everything seen before, either by covering a block for
//! the first time or by pushing a known block into a higher bucket.

use crate::error::CovError;
use crate::region::CoverageSnapshot;

/// Bucket index of a raw counter value, 0 through 8.
#[inline]
pub fn bucket(value: u8) -> u8 {
    match value {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 3,
        4..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=127 => 7,
        128..=255 => 8,
    }
}

/// Per-index maximum bucket observed over a whole session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeTable {
    pub buckets: Vec<u8>,
}

impl CumulativeTable {
    pub fn new(len: usize) -> CumulativeTable {
        CumulativeTable { buckets: vec![0; len] }
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Number of indices ever seen nonzero.
    pub fn covered_blocks(&self) -> usize {
        self.buckets.iter().filter(|&&b| b > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoveltyReport {
    /// Indices first seen nonzero, ascending.
    pub new_blocks: Vec<u64>,
    /// (index, new bucket) for already-covered indices whose bucket rose.
    pub new_buckets: Vec<(u64, u8)>,
}

impl NoveltyReport {
    pub fn is_interesting(&self) -> bool {
        !self.new_blocks.is_empty() || !self.new_buckets.is_empty()
    }
}

fn check_len(snapshot: &CoverageSnapshot, table: &CumulativeTable) -> Result<(), CovError> {
    if snapshot.counters.len() != table.len() {
        return Err(CovError::LengthMismatch {
            snapshot: snapshot.counters.len(),
            table: table.len(),
        });
    }
    Ok(())
}

/// Compare a snapshot against the cumulative table without updating it.
pub fn classify(snapshot: &CoverageSnapshot, table: &CumulativeTable) -> Result<NoveltyReport, CovError> {
    check_len(snapshot, table)?;
    let mut new_blocks = Vec::new();
    let mut new_buckets = Vec::new();
    for (i, (&v, &seen)) in snapshot.counters.iter().zip(&table.buckets).enumerate() {
        let b = bucket(v);
        if b <= seen {
            continue;
        }
        if seen == 0 {
            new_blocks.push(i as u64);
        } else {
            new_buckets.push((i as u64, b));
        }
    }
    Ok(NoveltyReport { new_blocks, new_buckets })
}

/// Fold a snapshot into the table. Returns how many indices went from
/// uncovered to covered.
pub fn union_into(table: &mut CumulativeTable, snapshot: &CoverageSnapshot) -> Result<usize, CovError> {
    check_len(snapshot, table)?;
    let mut newly_covered = 0;
    for (slot, &v) in table.buckets.iter_mut().zip(&snapshot.counters) {
        let b = bucket(v);
        if b > *slot {
            if *slot == 0 {
                newly_covered += 1;
            }
            *slot = b;
        }
    }
    Ok(newly_covered)
}
