//! Block-coverage instrumentation for the three toydb binaries.
//!
//! The CFG manifests under `manifests/` are hand-maintained mirrors of the
//! instrumented functions in this crate. At startup each binary plans its
//! own manifest (critical-edge split + counter assignment) and resolves
//! block names to local counter slots; the planner is deterministic, so
//! the slots agree with whatever layout the fuzzer linked from the same
//! manifests.
//!
//! `hit_block` marks entry into a named source block. `hit_edge` marks
//! traversal of a formerly-critical edge and bumps the dummy block the
//! split introduced; for non-critical edges it is a no-op, keeping call
//! sites stable if the manifest changes.
//!
//! A thread-local trace can record the exact block path for oracle tests
//! that compare counter state against independently derived expectations.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::OnceLock;

use blockplan::{parse_manifest, plan_binary, BinaryManifest, CounterAssignment, DUMMY_MARKER};
use covmap::AttachedWindow;

pub const GATEWAY: &str = "toydb-gateway";
pub const QUERY: &str = "toydb-query";
pub const STORAGE: &str = "toydb-storage";

pub const BINARIES: [&str; 3] = [GATEWAY, QUERY, STORAGE];

pub fn manifest_text(binary: &str) -> &'static str {
    match binary {
        GATEWAY => include_str!("../manifests/toydb-gateway.manifest"),
        QUERY => include_str!("../manifests/toydb-query.manifest"),
        STORAGE => include_str!("../manifests/toydb-storage.manifest"),
        other => panic!("unknown toydb binary {other}"),
    }
}

/// Parse and split-plan one binary's manifest. Panics only on a broken
/// embedded manifest, which the consistency tests preclude.
pub fn planned(binary: &str) -> (BinaryManifest, CounterAssignment) {
    let manifest = parse_manifest(manifest_text(binary)).expect("embedded manifest parses");
    plan_binary(&manifest).expect("embedded manifest plans")
}

struct BinInstr {
    // "function/block" -> local counter slot, over the split manifest
    slots: HashMap<String, u64>,
    window: Option<AttachedWindow>,
}

impl BinInstr {
    fn build(binary: &str, window: Option<AttachedWindow>) -> BinInstr {
        let (split, assignment) = planned(binary);
        let mut slots = HashMap::new();
        for func in &split.functions {
            for block in &func.blocks {
                let slot = assignment
                    .slot_of_named(&split, &func.name, block)
                    .expect("assignment covers every split block");
                slots.insert(format!("{}/{}", func.name, block), u64::from(slot));
            }
        }
        if let Some(w) = &window {
            // a region linked from different manifests would misattribute
            // hits; refuse to run rather than corrupt the signal
            let needed = slots.len() as u64;
            assert!(
                w.view().length >= needed,
                "{binary}: window holds {} counters, manifest needs {needed}",
                w.view().length
            );
        }
        BinInstr { slots, window }
    }
}

struct Registry {
    bins: HashMap<&'static str, BinInstr>,
}

static REGISTRY: OnceLock<Registry> = OnceLock::new();

thread_local! {
    static TRACE: RefCell<Option<Vec<(&'static str, &'static str, &'static str)>>> =
        const { RefCell::new(None) };
}

/// Target-process initialization: resolve this binary's slots and attach
/// its window via the COVRT_REGION / COVRT_BINARY handshake. Without the
/// handshake the process runs uninstrumented.
pub fn init_process(binary: &'static str) {
    let window = covmap::attach_from_env().unwrap_or_else(|e| {
        eprintln!("coverage attach failed: {e}");
        std::process::exit(64);
    });
    let mut bins = HashMap::new();
    bins.insert(binary, BinInstr::build(binary, window));
    let _ = REGISTRY.set(Registry { bins });
}

/// In-process harness initialization: attach all three binaries' windows
/// from one named region. Callable once per process; later calls must
/// pass the same region to stay meaningful and are ignored otherwise.
pub fn init_in_process(region_name: &str) {
    let mut bins = HashMap::new();
    for b in BINARIES {
        let window = covmap::attach_to(region_name, b).expect("region carries toydb layout");
        bins.insert(b, BinInstr::build(b, Some(window)));
    }
    let _ = REGISTRY.set(Registry { bins });
}

#[inline]
fn with_bin(binary: &str, f: impl FnOnce(&BinInstr)) {
    if let Some(reg) = REGISTRY.get() {
        if let Some(bin) = reg.bins.get(binary) {
            f(bin);
        }
    }
}

/// Mark entry into block `block` of `function` in `binary`.
pub fn hit_block(binary: &'static str, function: &'static str, block: &'static str) {
    with_bin(binary, |bin| {
        match bin.slots.get(&format!("{function}/{block}")) {
            Some(&slot) => {
                if let Some(w) = &bin.window {
                    w.hit(slot);
                }
            }
            // a call site naming an undeclared block is a manifest bug;
            // fail loudly in tests, stay alive in production
            None => {
                if cfg!(debug_assertions) {
                    panic!("{binary}: block {function}/{block} not in manifest");
                }
            }
        }
    });
    TRACE.with(|t| {
        if let Some(v) = t.borrow_mut().as_mut() {
            v.push((binary, function, block));
        }
    });
}

/// Mark traversal of the edge `src -> dst` in `function`. Bumps the dummy
/// block if the edge was critical and split; no-op otherwise. Dummy hits
/// are deliberately absent from the trace: the oracle derives them from
/// block adjacency instead.
pub fn hit_edge(
    binary: &'static str,
    function: &'static str,
    src: &'static str,
    dst: &'static str,
) {
    with_bin(binary, |bin| {
        if let Some(&slot) = bin.slots.get(&format!("{function}/{src}->{dst}{DUMMY_MARKER}")) {
            if let Some(w) = &bin.window {
                w.hit(slot);
            }
        }
    });
}

/// Begin recording (binary, function, block) hits on this thread.
pub fn trace_begin() {
    TRACE.with(|t| *t.borrow_mut() = Some(Vec::new()));
}

/// Stop recording and return the ordered hits.
pub fn trace_take() -> Vec<(&'static str, &'static str, &'static str)> {
    TRACE.with(|t| t.borrow_mut().take().unwrap_or_default())
}

/// Number of addressable blocks (split manifest) per binary, as resolved
/// at runtime. Consistency tests compare this against the manifest.
pub fn registered_block_count(binary: &str) -> Option<usize> {
    REGISTRY.get().and_then(|r| r.bins.get(binary)).map(|b| b.slots.len())
}
