//! A deliberately small three-process SQL engine: gateway (front door),
//! query (parse/plan/route), storage (catalog + execution). Every branch
//! decision is instrumented against hand-maintained block manifests, and
//! a handful of faults are planted at hard-to-reach spots so an external
//! fuzzer has something real to find.

pub mod catalog;
pub mod engine;
pub mod eval;
pub mod gateway;
pub mod instr;
pub mod net;
pub mod plan;
pub mod query;
pub mod sentinel;
pub mod storage;
pub mod value;
pub mod wire;
