//! Every block in every split manifest, including the minted dummy, must
//! be reachable: an in-process statement battery plus two spawned-trio
//! waves light every counter. A block nobody can hit is dead weight in
//! the coverage map and almost always a manifest/code drift bug.

mod util;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Once;
use std::time::Duration;

use toydb::catalog::Database;
use toydb::engine::execute;
use toydb::instr::{self, BINARIES};
use toydb::wire::{self, Frame};

static PANIC_MODE: Once = Once::new();

fn panic_mode() {
    PANIC_MODE.call_once(|| {
        std::env::set_var(toydb::sentinel::ENV_FAULT_MODE, "panic");
        // keep expected fault panics quiet, let real failures through
        std::panic::set_hook(Box::new(|info| {
            let msg = info
                .payload()
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| info.payload().downcast_ref::<&str>().copied())
                .unwrap_or("");
            if !msg.starts_with("planted fault:") {
                eprintln!("panic at {:?}: {msg}", info.location());
            }
        }));
    });
}

fn faults(f: impl FnOnce()) -> bool {
    catch_unwind(AssertUnwindSafe(f)).is_err()
}

/// Backend whose downstream is always gone; drives the *_fail blocks.
struct DownBackend;

impl toydb::query::Backend for DownBackend {
    fn round_trip(&mut self, _frame: &Frame) -> std::io::Result<Frame> {
        Err(std::io::Error::other("downstream unavailable"))
    }
}

/// Statements that shape tables so every metrics bucket and every
/// statement-handler arm fires at least once. Errors are expected for
/// many of them; only transport failure would be a bug here.
const BATTERY: &[&str] = &[
    // table-count and column-count buckets, plus create arms
    "CREATE TABLE t1 (a INT)",
    "CREATE TABLE t2 (a INT, b TEXT)",
    "CREATE TABLE t3 (a INT, b TEXT, c INT)",
    "CREATE TABLE t4 (a INT, b INT, c INT, d INT)",
    "CREATE TABLE t1 (a INT)",
    "CREATE TABLE bad (a INT, a INT)",
    // row-count buckets 1, 2-3, 4-7, 8-15, 16+
    "INSERT INTO t1 VALUES (1)",
    "INSERT INTO t1 VALUES (2)",
    "INSERT INTO t1 VALUES (3)",
    "INSERT INTO t1 VALUES (4)",
    "INSERT INTO t1 VALUES (5)",
    "INSERT INTO t1 VALUES (6)",
    "INSERT INTO t1 VALUES (7)",
    "INSERT INTO t1 VALUES (8)",
    "INSERT INTO t1 VALUES (9)",
    "INSERT INTO t1 VALUES (10)",
    "INSERT INTO t1 VALUES (11)",
    "INSERT INTO t1 VALUES (12)",
    "INSERT INTO t1 VALUES (13)",
    "INSERT INTO t1 VALUES (14)",
    "INSERT INTO t1 VALUES (15)",
    "INSERT INTO t1 VALUES (16)",
    // insert arms
    "INSERT INTO t2 (a, b) VALUES (1, 'one')",
    "INSERT INTO t2 VALUES (2, 'two')",
    "INSERT INTO t3 VALUES (1, 'x', 2)",
    "INSERT INTO t2 (nope) VALUES (1)",
    "INSERT INTO t1 VALUES (1, 2)",
    "INSERT INTO missing VALUES (1)",
    "INSERT INTO t1 VALUES (1 / 0)",
    "INSERT INTO t1 VALUES ('x')",
    // select shapes: list arity, FROM, WHERE depth, ORDER BY arity,
    // LIMIT buckets, feature counts, clause pairings
    "SELECT 1",
    "SELECT 1, 'x'",
    "SELECT a FROM t1",
    "SELECT * FROM t2",
    "SELECT a FROM missing",
    "SELECT a FROM t2 WHERE a = 1",
    "SELECT a FROM t2 WHERE b",
    "SELECT a FROM t2 WHERE NOT a",
    "SELECT a FROM t2 WHERE a = 1 AND NOT b",
    "SELECT a FROM t2 WHERE a OR b AND NOT a",
    "SELECT a FROM t2 WHERE nope = 1",
    "SELECT a FROM t1 ORDER BY a",
    "SELECT a FROM t2 ORDER BY a, b",
    "SELECT a FROM t3 ORDER BY a, b, c",
    "SELECT a FROM t1 WHERE a ORDER BY a",
    "SELECT a FROM t1 WHERE a ORDER BY a LIMIT 2",
    "SELECT a, b FROM t2 WHERE a ORDER BY a LIMIT 1",
    "SELECT a FROM t1 LIMIT 0",
    "SELECT a FROM t1 LIMIT 20",
    "SELECT a FROM t1 LIMIT 99999999999999999999",
    "SELECT a FROM t1 WHERE 1 / 0",
    "SELECT a FROM t1 ORDER BY 1 % 0",
    // expression arms in evaluation and in the planner's operator scan
    "SELECT a % 2 FROM t1",
    "SELECT a / 2 FROM t1",
    "SELECT a + 1 - 2 FROM t1",
    "SELECT a * 2 FROM t1",
    "SELECT -a FROM t1",
    "SELECT -'x'",
    "SELECT 1 + 'x'",
    "SELECT 'a' < 'b'",
    "SELECT 1 = 'x'",
    "SELECT 1 <> 2",
    "SELECT (1)",
    "SELECT count(a) FROM t1",
    "SELECT a",
    "SELECT 99999999999999999999",
    // update arms
    "UPDATE t2 SET b = 'seen' WHERE a = 1",
    "UPDATE t1 SET a = 0",
    "UPDATE t2 SET a = 1, b = 'x' WHERE a = 1",
    "UPDATE missing SET a = 1",
    "UPDATE t2 SET nope = 1",
    "UPDATE t2 SET a = 1 WHERE 1 / 0",
    "UPDATE t2 SET a = 1 / 0",
    "UPDATE t2 SET a = 'x'",
    // delete arms; full-match deletes are the planted fault, kept out
    "DELETE FROM missing",
    "DELETE FROM t3 WHERE a = 99",
    "DELETE FROM t4",
    "DELETE FROM t2 WHERE 1 / 0",
    // alter arms
    "ALTER TABLE missing ADD COLUMN x INT",
    "ALTER TABLE t1 ADD COLUMN e INT",
    "ALTER TABLE t1 ADD COLUMN a INT",
    "ALTER TABLE t1 DROP COLUMN e",
    "ALTER TABLE t1 DROP COLUMN nope",
    "ALTER TABLE t4 DROP COLUMN d",
    "ALTER TABLE t4 DROP COLUMN c",
    "ALTER TABLE t4 DROP COLUMN b",
    "ALTER TABLE t4 DROP COLUMN a",
    "ALTER TABLE t4 RENAME TO t5",
    "ALTER TABLE t5 RENAME TO t1",
    "DROP TABLE t5",
    "DROP TABLE nope",
    // procedures and parse failures
    "CALL toydb_version()",
    "CALL toydb_sleep(1)",
    "CALL toydb_sleep('x')",
    "CALL toydb_sleep(1, 2)",
    "CALL toydb_nope()",
    "SELECT 1 /",
    "SELECT 1; SELECT 2",
];

#[test]
fn every_declared_block_is_reachable() {
    panic_mode();
    let region = covmap::CoverageRegion::create(&util::toydb_layout()).expect("region");
    instr::init_in_process(region.name());

    // 1. in-process battery through the full three-handler pipeline
    let mut pipe = util::Pipeline::new();
    for sql in BATTERY {
        pipe.run(sql);
    }

    // gateway-side input validation
    pipe.run_raw(b"   ");
    pipe.run_raw(&vec![b'a'; 70_000]);
    pipe.run_raw(b"\xff\xfe");

    // 2. planted faults, in panic mode so the process survives
    assert!(faults(|| {
        pipe.run("SELECT 'gw_trap'");
    }));
    assert!(faults(|| {
        pipe.run("CALL toydb_cancel()");
    }));
    assert!(faults(|| {
        pipe.run("SELECT a FROM t1 ORDER BY a, a, a, a");
    }));
    let mut db = Database::new();
    let _ = execute(&mut db, "CREATE TABLE w (a INT, b TEXT)");
    let _ = execute(&mut db, "INSERT INTO w VALUES (1, 'x')");
    let _ = execute(&mut db, "INSERT INTO w VALUES (2, 'y')");
    assert!(faults(|| {
        let _ = execute(&mut db, "ALTER TABLE w ADD COLUMN c TEXT");
    }));
    let _ = execute(&mut db, "CREATE TABLE v (a INT)");
    let _ = execute(&mut db, "INSERT INTO v VALUES (1)");
    let _ = execute(&mut db, "INSERT INTO v VALUES (2)");
    assert!(faults(|| {
        let _ = execute(&mut db, "DELETE FROM v WHERE a > 0");
    }));

    // 3. arms only reachable past the upstream handler: storage sees
    // canonical text from the planner, so its own parse error and the
    // procedure fallback need a direct drive, as does a result too large
    // to render (the statement that builds it fits, the result does not)
    let _ = execute(&mut db, "SELECT 1 /");
    let _ = execute(&mut db, "CALL toydb_nope()");
    let _ = execute(&mut db, "CREATE TABLE big (b TEXT)");
    let wide = "x".repeat(60_000);
    for _ in 0..5 {
        let _ = execute(&mut db, &format!("INSERT INTO big VALUES ('{wide}')"));
    }
    let _ = execute(&mut db, "SELECT b FROM big");

    // 4. dependency-loss arms via a dead downstream
    use toydb::gateway::GwAction;
    use toydb::query::QyAction;
    assert!(matches!(
        toydb::gateway::handle_query(b"SELECT 1", &mut DownBackend),
        GwAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::gateway::handle_control(b"ping", &mut DownBackend),
        GwAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::gateway::handle_control(b"drop", &mut DownBackend),
        GwAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::gateway::handle_control(b"nope", &mut DownBackend),
        GwAction::Reply(_)
    ));
    assert!(matches!(
        toydb::query::handle_statement("SELECT 1", &mut DownBackend),
        QyAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::query::handle_control(b"ping", &mut DownBackend),
        QyAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::query::handle_control(b"drop", &mut DownBackend),
        QyAction::DepLost(_)
    ));
    assert!(matches!(
        toydb::query::handle_control(b"nope", &mut DownBackend),
        QyAction::Reply(_)
    ));
    assert_eq!(toydb::storage::handle_control(&mut db, b"nope").tag, wire::TAG_ERROR);

    // 5. wave A: live trio, full client traffic, clean shutdown cascade.
    // The checkpoint fork happens in the single-threaded query server.
    {
        let trio = util::Trio::spawn(&region);
        let mut c = trio.connect_gateway();
        let t = Duration::from_secs(10);
        let ping = util::round_trip_timeout(
            &mut c,
            &Frame::new(wire::TAG_CONTROL, b"ping".to_vec()),
            t,
        )
        .expect("ping");
        assert_eq!(ping.tag, wire::TAG_RESULT);
        let sel = util::send_sql(&mut c, "SELECT 1").expect("select");
        assert_eq!(sel.tag, wire::TAG_RESULT);
        let ckpt = util::send_sql(&mut c, "CALL toydb_checkpoint()").expect("checkpoint");
        assert_eq!(ckpt.tag, wire::TAG_RESULT, "{}", ckpt.text());
        let dropped = util::round_trip_timeout(
            &mut c,
            &Frame::new(wire::TAG_CONTROL, b"drop".to_vec()),
            t,
        )
        .expect("drop");
        assert_eq!(dropped.tag, wire::TAG_RESULT);
        let unknown = util::round_trip_timeout(
            &mut c,
            &Frame::new(wire::TAG_CONTROL, b"nope".to_vec()),
            t,
        )
        .expect("unknown control");
        assert_eq!(unknown.tag, wire::TAG_ERROR);
        let junk =
            util::round_trip_timeout(&mut c, &Frame::new(b'Z', b"junk".to_vec()), t).expect("junk");
        assert_eq!(junk.tag, wire::TAG_ERROR);
        let bye = util::round_trip_timeout(
            &mut c,
            &Frame::new(wire::TAG_SHUTDOWN, Vec::new()),
            t,
        )
        .expect("shutdown");
        assert_eq!(bye.tag, wire::TAG_RESULT);
        let workers = trio.census().get("toydb-query").map_or(0, |p| p.len());
        assert!(workers >= 2, "checkpoint worker should join the census");
    }

    // 6. wave B: junk frames straight at the inner listeners, reachable
    // once their upstream dies mid-conversation
    {
        let mut trio = util::Trio::spawn(&region);
        trio.kill("toydb-gateway");
        let mut q = trio.connect("qy.sock");
        let junk = util::round_trip_timeout(
            &mut q,
            &Frame::new(b'Z', b"?".to_vec()),
            Duration::from_secs(10),
        )
        .expect("query junk reply");
        assert_eq!(junk.tag, wire::TAG_ERROR);
        trio.kill("toydb-query");
        let mut s = trio.connect("st.sock");
        let junk = util::round_trip_timeout(
            &mut s,
            &Frame::new(b'Z', b"?".to_vec()),
            Duration::from_secs(10),
        )
        .expect("storage junk reply");
        assert_eq!(junk.tag, wire::TAG_ERROR);
        let bye = util::round_trip_timeout(
            &mut s,
            &Frame::new(wire::TAG_SHUTDOWN, Vec::new()),
            Duration::from_secs(10),
        )
        .expect("storage shutdown");
        assert_eq!(bye.tag, wire::TAG_RESULT);
    }

    // 7. every named block in every split manifest must now be nonzero
    let snap = region.snapshot();
    let mut missing = Vec::new();
    let mut total = 0u64;
    for bin in BINARIES {
        let (split, assignment) = instr::planned(bin);
        let win = region.layout().window(bin).expect("window").clone();
        for func in &split.functions {
            for block in &func.blocks {
                total += 1;
                let slot = assignment
                    .slot_of_named(&split, &func.name, block)
                    .expect("slot for every block");
                if snap.counters[(win.offset + u64::from(slot)) as usize] == 0 {
                    missing.push(format!("{bin}:{}/{}", func.name, block));
                }
            }
        }
        assert!(
            win.length as usize >= assignment.len(),
            "{bin}: window holds {} counters, needs {}",
            win.length,
            assignment.len()
        );
    }
    assert!(
        missing.is_empty(),
        "{} of {total} blocks never hit:\n{}",
        missing.len(),
        missing.join("\n")
    );
}
