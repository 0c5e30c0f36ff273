//! Test-case generation front door: pick a strategy by weight, mutate,
//! and record provenance so any case can be re-derived from (parent,
//! seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dict::Dictionary;
use crate::error::SqlError;
use crate::lex::split_statements;
use crate::mutate::{dictionary_mutate, mutate_ast};
use crate::parse::parse_strict;
use crate::pool::FragmentPool;
use crate::serialize::serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixWeights {
    pub ast_mutation: f64,
    pub dictionary_mutation: f64,
}

impl Default for MixWeights {
    fn default() -> MixWeights {
        MixWeights { ast_mutation: 0.7, dictionary_mutation: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    AstMutation,
    DictionaryMutation,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::AstMutation => write!(f, "ast"),
            Strategy::DictionaryMutation => write!(f, "dict"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub strategy: Strategy,
    pub parent_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub statements: Vec<String>,
    pub provenance: Provenance,
}

impl TestCase {
    pub fn script(&self) -> String {
        self.statements.join("; ")
    }
}

/// Derive a new test case from a parent's text.
///
/// The strategy is drawn by weight; the AST path falls back to dictionary
/// mutation when the parent does not parse strictly, so generation always
/// produces output. Identical inputs and seed produce an identical case.
pub fn generate(
    parent_text: &str,
    parent_id: &str,
    mix: MixWeights,
    pool: &FragmentPool,
    dict: &Dictionary,
    seed: u64,
) -> Result<TestCase, SqlError> {
    let total = mix.ast_mutation + mix.dictionary_mutation;
    debug_assert!(total > 0.0, "strategy weights must not all be zero");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want_ast = rng.gen_range(0.0..1.0) * total < mix.ast_mutation;

    let (strategy, text) = if want_ast {
        match parse_strict(parent_text) {
            Ok(ast) => {
                let mutant = mutate_ast(&ast, pool, &mut rng);
                (Strategy::AstMutation, serialize(&mutant))
            }
            // relaxed-robustness rule: an unparseable parent is still
            // usable material at the token level
            Err(_) => (Strategy::DictionaryMutation, dictionary_mutate(parent_text, dict, &mut rng)?),
        }
    } else {
        (Strategy::DictionaryMutation, dictionary_mutate(parent_text, dict, &mut rng)?)
    };

    let mut statements = split_statements(&text);
    if statements.is_empty() {
        statements.push(text.trim().to_string());
    }
    Ok(TestCase {
        statements,
        provenance: Provenance { strategy, parent_id: parent_id.to_string(), seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AST_ONLY: MixWeights = MixWeights { ast_mutation: 1.0, dictionary_mutation: 0.0 };
    const DICT_ONLY: MixWeights = MixWeights { ast_mutation: 0.0, dictionary_mutation: 1.0 };

    #[test]
    fn parseable_parent_with_full_ast_weight_uses_ast_strategy() {
        let pool = FragmentPool::default();
        let dict = Dictionary::builtin();
        let case = generate("SELECT 1", "p0", AST_ONLY, &pool, &dict, 5).unwrap();
        assert_eq!(case.provenance.strategy, Strategy::AstMutation);
        assert!(!case.statements.is_empty());
    }

    #[test]
    fn unparseable_parent_falls_back_to_dictionary() {
        let pool = FragmentPool::default();
        let dict = Dictionary::builtin();
        let case = generate("SELEC GLORP ((", "p1", AST_ONLY, &pool, &dict, 5).unwrap();
        assert_eq!(case.provenance.strategy, Strategy::DictionaryMutation);
        assert!(!case.statements.is_empty());
    }

    #[test]
    fn dictionary_weight_one_always_uses_dictionary() {
        let pool = FragmentPool::default();
        let dict = Dictionary::builtin();
        for seed in 0..10 {
            let case = generate("SELECT 1", "p2", DICT_ONLY, &pool, &dict, seed).unwrap();
            assert_eq!(case.provenance.strategy, Strategy::DictionaryMutation);
        }
    }

    #[test]
    fn identical_inputs_and_seed_reproduce_the_case() {
        let mut pool = FragmentPool::default();
        let frags = crate::pool::harvest_fragments(&["SELECT a FROM t WHERE a = 1".into()], true);
        pool.insert_all(frags);
        let dict = Dictionary::builtin();
        let a = generate("SELECT a FROM t", "p3", MixWeights::default(), &pool, &dict, 42).unwrap();
        let b = generate("SELECT a FROM t", "p3", MixWeights::default(), &pool, &dict, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance.seed, 42);
    }
}
