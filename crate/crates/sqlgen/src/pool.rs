//! Fragment pool: reusable subtrees harvested from interesting inputs.

use std::collections::HashSet;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::ast::Node;
use crate::serialize::serialize;

pub const DEFAULT_POOL_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FragmentKind {
    Statement,
    Where,
    OrderBy,
    Limit,
}

pub const FRAGMENT_KINDS: [FragmentKind; 4] =
    [FragmentKind::Statement, FragmentKind::Where, FragmentKind::OrderBy, FragmentKind::Limit];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub kind: FragmentKind,
    pub node: Node,
    /// Canonical serialized form; the dedup key is derived from it.
    pub text: String,
    pub origin_digest: [u8; 32],
}

impl Fragment {
    pub fn new(kind: FragmentKind, node: Node) -> Fragment {
        let text = serialize(&node);
        let mut h = Sha256::new();
        h.update([kind as u8]);
        h.update(text.as_bytes());
        Fragment { kind, node, text, origin_digest: h.finalize().into() }
    }
}

/// Bounded FIFO store of deduplicated fragments, bucketed by kind.
#[derive(Debug, Clone)]
pub struct FragmentPool {
    capacity: usize,
    // insertion order across all kinds; front is evicted first
    order: Vec<(FragmentKind, [u8; 32])>,
    buckets: Vec<(FragmentKind, Vec<Fragment>)>,
    digests: HashSet<[u8; 32]>,
}

impl FragmentPool {
    pub fn new(capacity: usize) -> FragmentPool {
        FragmentPool {
            capacity,
            order: Vec::new(),
            buckets: FRAGMENT_KINDS.iter().map(|&k| (k, Vec::new())).collect(),
            digests: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn bucket_mut(&mut self, kind: FragmentKind) -> &mut Vec<Fragment> {
        &mut self.buckets.iter_mut().find(|(k, _)| *k == kind).unwrap().1
    }

    pub fn bucket(&self, kind: FragmentKind) -> &[Fragment] {
        &self.buckets.iter().find(|(k, _)| *k == kind).unwrap().1
    }

    /// Insert unless a fragment with the same digest is already pooled.
    /// Returns whether the pool changed. At capacity, the oldest fragment
    /// is evicted first.
    pub fn insert(&mut self, fragment: Fragment) -> bool {
        if self.capacity == 0 || !self.digests.insert(fragment.origin_digest) {
            return false;
        }
        while self.order.len() >= self.capacity {
            let (kind, digest) = self.order.remove(0);
            self.digests.remove(&digest);
            self.bucket_mut(kind).retain(|f| f.origin_digest != digest);
        }
        self.order.push((fragment.kind, fragment.origin_digest));
        self.bucket_mut(fragment.kind).push(fragment);
        true
    }

    pub fn insert_all(&mut self, fragments: impl IntoIterator<Item = Fragment>) -> usize {
        fragments.into_iter().filter(|f| self.insert(f.clone())).count()
    }

    /// Uniform pick among fragments of one kind.
    pub fn pick(&self, kind: FragmentKind, rng: &mut impl Rng) -> Option<&Fragment> {
        let bucket = self.bucket(kind);
        if bucket.is_empty() {
            None
        } else {
            Some(&bucket[rng.gen_range(0..bucket.len())])
        }
    }

    /// Kinds that currently have at least one fragment, in fixed order.
    pub fn available_kinds(&self) -> Vec<FragmentKind> {
        FRAGMENT_KINDS.iter().copied().filter(|&k| !self.bucket(k).is_empty()).collect()
    }
}

impl Default for FragmentPool {
    fn default() -> FragmentPool {
        FragmentPool::new(DEFAULT_POOL_CAPACITY)
    }
}

/// Recovering-parse every statement of an interesting case and return the
/// harvested fragments; non-interesting cases yield nothing.
pub fn harvest_fragments(statements: &[String], interesting: bool) -> Vec<Fragment> {
    if !interesting {
        return Vec::new();
    }
    statements
        .iter()
        .flat_map(|s| crate::parse::parse_recovering(s).fragments)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_fragment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frag(sql: &str) -> Fragment {
        let node = parse_fragment(sql, FragmentKind::Statement).unwrap();
        Fragment::new(FragmentKind::Statement, node)
    }

    #[test]
    fn duplicate_digests_are_rejected() {
        let mut pool = FragmentPool::default();
        assert!(pool.insert(frag("SELECT 1")));
        assert!(!pool.insert(frag("SELECT 1")));
        // same content through different whitespace hashes identically
        assert!(!pool.insert(frag("SELECT    1")));
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn capacity_evicts_oldest_first() {
        let mut pool = FragmentPool::new(2);
        pool.insert(frag("SELECT 1"));
        pool.insert(frag("SELECT 2"));
        pool.insert(frag("SELECT 3"));
        assert_eq!(pool.len(), 2);
        let texts: Vec<&str> =
            pool.bucket(FragmentKind::Statement).iter().map(|f| f.text.as_str()).collect();
        assert_eq!(texts, vec!["SELECT 2", "SELECT 3"]);
        // the evicted digest may be pooled again
        assert!(pool.insert(frag("SELECT 1")));
    }

    #[test]
    fn harvest_gate_and_dedup() {
        let stmts = vec!["SELECT 1".to_string(), "BOGUS".to_string()];
        assert!(harvest_fragments(&stmts, false).is_empty());
        let got = harvest_fragments(&stmts, true);
        assert_eq!(got.len(), 1);
        let mut pool = FragmentPool::default();
        assert_eq!(pool.insert_all(got.clone()), 1);
        assert_eq!(pool.insert_all(got), 0);
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn pick_is_uniform_over_the_bucket_and_deterministic() {
        let mut pool = FragmentPool::default();
        for i in 0..5 {
            pool.insert(frag(&format!("SELECT {i}")));
        }
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = pool.pick(FragmentKind::Statement, &mut a).unwrap().text.clone();
            let y = pool.pick(FragmentKind::Statement, &mut b).unwrap().text.clone();
            assert_eq!(x, y);
        }
        assert!(pool.pick(FragmentKind::Limit, &mut a).is_none());
        assert_eq!(pool.available_kinds(), vec![FragmentKind::Statement]);
    }
}
