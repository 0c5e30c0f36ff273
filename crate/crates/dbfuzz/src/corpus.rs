//! Corpus of retained test cases and their scheduling.
//!
//! Scheduling is weighted round-robin over an energy budget: picks go to
//! the entry with the most remaining energy, newest entry first among
//! ties, and each pick spends one unit. When every entry is spent the
//! whole corpus recycles at base energy, so nothing starves. Admission
//! pays double base energy, which front-loads exploration of fresh
//! coverage while it is fresh.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub statements: Vec<String>,
    /// Global counter indices this case covered when admitted. Empty for
    /// seeds (admitted on faith, not on measured coverage).
    pub signature: BTreeSet<u64>,
    pub energy: u32,
    /// Execution index at admission; seeds are 0. Later is newer.
    pub discovered_at: u64,
}

impl CorpusEntry {
    pub fn script(&self) -> String {
        self.statements.join("; ")
    }
}

#[derive(Debug)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    base_energy: u32,
}

impl Corpus {
    pub fn new(base_energy: u32) -> Corpus {
        assert!(base_energy >= 1, "base energy must be at least 1");
        Corpus { entries: Vec::new(), base_energy }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter()
    }

    pub fn push_seed(&mut self, id: impl Into<String>, statements: Vec<String>) {
        self.entries.push(CorpusEntry {
            id: id.into(),
            statements,
            signature: BTreeSet::new(),
            energy: self.base_energy,
            discovered_at: 0,
        });
    }

    /// Admit a case that produced novel coverage. Existing non-seed
    /// entries whose signature is contained in the newcomer's are
    /// dominated and dropped; seeds are never dropped.
    pub fn admit(
        &mut self,
        id: impl Into<String>,
        statements: Vec<String>,
        signature: BTreeSet<u64>,
        discovered_at: u64,
    ) {
        debug_assert!(!signature.is_empty(), "admitted cases carry measured coverage");
        self.entries
            .retain(|e| e.signature.is_empty() || !e.signature.is_subset(&signature));
        self.entries.push(CorpusEntry {
            id: id.into(),
            statements,
            signature,
            energy: self.base_energy * 2,
            discovered_at,
        });
    }

    /// Next entry to mutate. Panics on an empty corpus.
    pub fn pick_next(&mut self) -> CorpusEntry {
        assert!(!self.entries.is_empty(), "pick on empty corpus");
        if self.entries.iter().all(|e| e.energy == 0) {
            for e in &mut self.entries {
                e.energy = self.base_energy;
            }
        }
        let mut best = 0;
        for i in 1..self.entries.len() {
            let (a, b) = (&self.entries[i], &self.entries[best]);
            if (a.energy, a.discovered_at, i) > (b.energy, b.discovered_at, best) {
                best = i;
            }
        }
        self.entries[best].energy -= 1;
        self.entries[best].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(ids: &[u64]) -> BTreeSet<u64> {
        ids.iter().copied().collect()
    }

    #[test]
    fn energy_first_then_newest_with_per_pick_decay() {
        let mut c = Corpus::new(1);
        c.push_seed("b", vec!["SELECT 2".into()]);
        // a: more energy and newer
        c.admit("a", vec!["SELECT 1".into()], sig(&[7]), 5);
        let order: Vec<String> = (0..3).map(|_| c.pick_next().id).collect();
        assert_eq!(order, vec!["a", "a", "b"]);
    }

    #[test]
    fn exhausted_corpus_recycles_at_base_energy() {
        let mut c = Corpus::new(2);
        c.push_seed("s", vec!["SELECT 1".into()]);
        for _ in 0..2 {
            assert_eq!(c.pick_next().id, "s");
        }
        // all spent; next pick must still succeed
        assert_eq!(c.pick_next().id, "s");
        assert_eq!(c.pick_next().id, "s");
    }

    #[test]
    fn admission_drops_dominated_entries_but_never_seeds() {
        let mut c = Corpus::new(8);
        c.push_seed("seed", vec!["SELECT 1".into()]);
        c.admit("small", vec!["SELECT 2".into()], sig(&[1, 2]), 1);
        c.admit("other", vec!["SELECT 3".into()], sig(&[9]), 2);
        c.admit("big", vec!["SELECT 4".into()], sig(&[1, 2, 3]), 3);
        let ids: Vec<&str> = c.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["seed", "other", "big"], "subset signature must be dropped");
    }

    #[test]
    fn admitted_energy_is_double_base() {
        let mut c = Corpus::new(8);
        c.admit("x", vec!["SELECT 1".into()], sig(&[4]), 1);
        assert_eq!(c.iter().next().unwrap().energy, 16);
    }
}
