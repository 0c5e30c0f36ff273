//! SQL test-case generation built for robustness: a tolerant parser over
//! a compact dialect, tree mutation with relaxed validity checks,
//! fragment harvesting from inputs that fail whole-statement parsing, and
//! dictionary-driven token mutation as the universal fallback.

mod ast;
mod dict;
mod error;
mod gen;
mod lex;
mod mutate;
mod parse;
mod pool;
mod serialize;

pub use ast::{structural_eq, Node, NodeKind};
pub use dict::Dictionary;
pub use error::SqlError;
pub use gen::{generate, MixWeights, Provenance, Strategy, TestCase};
pub use lex::{line_col, quote_string, split_statements, tokenize, Token, TokenKind, KEYWORDS};
pub use mutate::{dictionary_mutate, mutate_ast};
pub use parse::{parse_fragment, parse_recovering, parse_strict, RecoveredParse};
pub use pool::{
    harvest_fragments, Fragment, FragmentKind, FragmentPool, DEFAULT_POOL_CAPACITY, FRAGMENT_KINDS,
};
pub use serialize::serialize;
