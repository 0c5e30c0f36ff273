//! Faults in the real three-process target must surface the way the
//! fuzzer's supervisor expects: the faulting process dies by the real
//! signal after persisting a fault record and leaving its busy marker,
//! and upstream processes exit with the dedicated dependency-loss status
//! instead of faking faults of their own.

mod util;

use std::os::unix::process::ExitStatusExt;
use std::path::Path;
use std::time::Duration;

use toydb::sentinel::DEP_LOST_EXIT;
use toydb::wire::{self, Frame};

const WAIT: Duration = Duration::from_secs(10);

fn fault_records(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).expect("fault dir") {
        let path = entry.expect("entry").path();
        if path.extension().and_then(|e| e.to_str()) == Some("fault") {
            out.push(std::fs::read_to_string(&path).expect("record"));
        }
    }
    out
}

fn region() -> covmap::CoverageRegion {
    covmap::CoverageRegion::create(&util::toydb_layout()).expect("region")
}

#[test]
fn gateway_trap_segfaults_with_record_and_busy_marker() {
    let region = region();
    let mut trio = util::Trio::spawn(&region);
    let gw_pid = trio.pid("toydb-gateway");

    let mut c = trio.connect_gateway();
    wire::write_frame(&mut c, &Frame::new(wire::TAG_QUERY, b"SELECT 'gw_trap'".to_vec()))
        .expect("send");
    // the gateway dies before replying
    assert!(wire::read_frame(&mut c).is_err(), "no reply from a dead gateway");

    let status = trio.wait_exit("toydb-gateway", WAIT);
    assert_eq!(status.signal(), Some(libc::SIGSEGV), "real segfault: {status:?}");

    let records = fault_records(&trio.fault_dir);
    assert_eq!(records.len(), 1, "exactly one fault record");
    assert!(records[0].contains("binary toydb-gateway"));
    assert!(records[0].contains("signal SIGSEGV"));
    assert!(records[0].contains("toydb-gateway!gw_handle_q"));

    // killed mid-request: the busy marker survives as evidence
    assert!(trio.census_dir.join(format!("{gw_pid}.busy")).exists());

    // downstream processes never notice; they only serve
    assert!(trio.census().contains_key("toydb-storage"));
}

#[test]
fn cancel_aborts_query_and_gateway_exits_dep_lost() {
    let region = region();
    let mut trio = util::Trio::spawn(&region);
    let qy_pid = trio.pid("toydb-query");

    let mut c = trio.connect_gateway();
    wire::write_frame(&mut c, &Frame::new(wire::TAG_QUERY, b"CALL toydb_cancel()".to_vec()))
        .expect("send");
    assert!(wire::read_frame(&mut c).is_err(), "no reply through a dead chain");

    let qy = trio.wait_exit("toydb-query", WAIT);
    assert_eq!(qy.signal(), Some(libc::SIGABRT), "real abort: {qy:?}");

    // the gateway loses its downstream mid-request: dedicated status, no
    // fault record of its own
    let gw = trio.wait_exit("toydb-gateway", WAIT);
    assert_eq!(gw.code(), Some(DEP_LOST_EXIT), "cascade exit: {gw:?}");

    let records = fault_records(&trio.fault_dir);
    assert_eq!(records.len(), 1, "only the query process faulted");
    assert!(records[0].contains("binary toydb-query"));
    assert!(records[0].contains("signal SIGABRT"));
    assert!(records[0].contains("toydb-query!qy_handle_q"));

    assert!(trio.census_dir.join(format!("{qy_pid}.busy")).exists());
}

#[test]
fn storage_fault_cascades_dep_lost_through_both_upstreams() {
    let region = region();
    let mut trio = util::Trio::spawn(&region);
    let st_pid = trio.pid("toydb-storage");

    let mut c = trio.connect_gateway();
    for sql in [
        "CREATE TABLE w (a INT, b TEXT)",
        "INSERT INTO w VALUES (1, 'x')",
        "INSERT INTO w VALUES (2, 'y')",
    ] {
        let reply = util::send_sql(&mut c, sql).expect("setup");
        assert_eq!(reply.tag, wire::TAG_RESULT, "{sql}: {}", reply.text());
    }
    wire::write_frame(
        &mut c,
        &Frame::new(wire::TAG_QUERY, b"ALTER TABLE w ADD COLUMN c TEXT".to_vec()),
    )
    .expect("send");
    assert!(wire::read_frame(&mut c).is_err());

    let st = trio.wait_exit("toydb-storage", WAIT);
    assert_eq!(st.signal(), Some(libc::SIGSEGV), "real segfault: {st:?}");
    let qy = trio.wait_exit("toydb-query", WAIT);
    assert_eq!(qy.code(), Some(DEP_LOST_EXIT), "query cascades: {qy:?}");
    let gw = trio.wait_exit("toydb-gateway", WAIT);
    assert_eq!(gw.code(), Some(DEP_LOST_EXIT), "gateway cascades: {gw:?}");

    let records = fault_records(&trio.fault_dir);
    assert_eq!(records.len(), 1, "one fault, two cascades");
    assert!(records[0].contains("binary toydb-storage"));
    assert!(records[0].contains("signal SIGSEGV"));
    assert!(records[0].contains("toydb-storage!st_alter"));
    assert!(records[0].contains("toydb-storage!st_execute"));

    assert!(trio.census_dir.join(format!("{st_pid}.busy")).exists());
}
