//! Query process: parses incoming SQL, plans it, intercepts procedure
//! calls that terminate here, and forwards everything else to storage in
//! canonical form.

use std::io;
use std::os::unix::net::UnixStream;

use crate::instr::{hit_block, QUERY};
use crate::plan::{plan_statement, Route};
use crate::sentinel::{self, FaultKind};
use crate::wire::{self, Frame};

/// Downstream round trip, injectable so handlers are testable without a
/// live storage process.
pub trait Backend {
    fn round_trip(&mut self, frame: &Frame) -> io::Result<Frame>;
}

pub struct StreamBackend(pub UnixStream);

impl Backend for StreamBackend {
    fn round_trip(&mut self, frame: &Frame) -> io::Result<Frame> {
        wire::round_trip(&mut self.0, frame)
    }
}

pub enum QyAction {
    Reply(Frame),
    /// Downstream vanished; the process should exit as a dependent loss.
    DepLost(&'static str),
}

fn b(function: &'static str, block: &'static str) {
    hit_block(QUERY, function, block);
}

pub fn handle_statement(sql: &str, backend: &mut dyn Backend) -> QyAction {
    let _f = sentinel::frame("toydb-query!qy_handle_q");
    b("qy_handle_q", "entry");
    let script = match sqlgen::parse_strict(sql) {
        Ok(s) => s,
        Err(e) => {
            b("qy_handle_q", "parse_err");
            return QyAction::Reply(Frame::error(format!("parse error: {e}")));
        }
    };
    if script.children.len() != 1 {
        b("qy_handle_q", "multi_stmt");
        return QyAction::Reply(Frame::error("one statement per request"));
    }
    b("qy_handle_q", "planned");
    match plan_statement(&script.children[0]) {
        Route::Reject(msg) => {
            b("qy_handle_q", "route_reject");
            QyAction::Reply(Frame::error(msg))
        }
        Route::Cancel => {
            b("qy_handle_q", "route_cancel");
            b("qy_handle_q", "cancel_fire");
            sentinel::crash(QUERY, FaultKind::Abort, "cancel raced the active plan");
        }
        Route::Checkpoint => {
            b("qy_handle_q", "route_checkpoint");
            match spawn_worker() {
                Ok(()) => {
                    b("qy_handle_q", "ckpt_parent");
                    b("qy_handle_q", "ckpt_reply");
                    QyAction::Reply(Frame::result("checkpoint done"))
                }
                Err(e) => QyAction::Reply(Frame::error(format!("checkpoint failed: {e}"))),
            }
        }
        Route::Forward(text) => {
            b("qy_handle_q", "route_forward");
            match backend.round_trip(&Frame::new(wire::TAG_PLAN, text.into_bytes())) {
                Err(_) => {
                    b("qy_handle_q", "fwd_fail");
                    QyAction::DepLost("toydb-storage")
                }
                Ok(reply) if reply.tag == wire::TAG_RESULT => {
                    b("qy_handle_q", "resp_ok");
                    b("qy_handle_q", "reply_ok");
                    QyAction::Reply(reply)
                }
                Ok(reply) => {
                    b("qy_handle_q", "resp_err");
                    b("qy_handle_q", "reply_err");
                    QyAction::Reply(Frame::new(wire::TAG_ERROR, reply.payload))
                }
            }
        }
    }
}

/// Fork a short-lived checkpoint worker. The child only touches the
/// shared coverage window and its census record, then exits.
fn spawn_worker() -> io::Result<()> {
    // Safety: the child calls only async-signal-safe work plus mmap
    // stores before _exit.
    let pid = unsafe { libc::fork() };
    if pid < 0 {
        return Err(io::Error::last_os_error());
    }
    if pid == 0 {
        sentinel::register_process(QUERY, "worker");
        worker();
        unsafe { libc::_exit(0) };
    }
    let mut status = 0;
    unsafe { libc::waitpid(pid, &mut status, 0) };
    Ok(())
}

pub fn worker() {
    b("qy_worker", "w_enter");
    b("qy_worker", "w_done");
}

pub fn handle_control(payload: &[u8], backend: &mut dyn Backend) -> QyAction {
    let _f = sentinel::frame("toydb-query!qy_handle_c");
    b("qy_handle_c", "entry");
    match payload {
        b"ping" => {
            b("qy_handle_c", "c_ping");
            match backend.round_trip(&Frame::new(wire::TAG_CONTROL, b"ping".to_vec())) {
                Ok(reply) => {
                    b("qy_handle_c", "ping_ok");
                    QyAction::Reply(reply)
                }
                Err(_) => {
                    b("qy_handle_c", "ping_fail");
                    QyAction::DepLost("toydb-storage")
                }
            }
        }
        b"drop" => {
            b("qy_handle_c", "c_drop");
            match backend.round_trip(&Frame::new(wire::TAG_CONTROL, b"drop".to_vec())) {
                Ok(reply) => {
                    b("qy_handle_c", "drop_ok");
                    QyAction::Reply(reply)
                }
                Err(_) => {
                    b("qy_handle_c", "drop_fail");
                    QyAction::DepLost("toydb-storage")
                }
            }
        }
        _ => {
            b("qy_handle_c", "c_unknown");
            QyAction::Reply(Frame::error("unknown control"))
        }
    }
}

/// Serve loop: one upstream (gateway) connection at a time over a single
/// persistent downstream (storage) connection.
pub fn run_query(sock_dir: &std::path::Path) -> io::Result<()> {
    let _f = sentinel::frame("toydb-query!qy_main");
    b("qy_main", "boot");
    let storage = crate::net::connect_retry(&sock_dir.join("st.sock"))?;
    let mut backend = StreamBackend(storage);
    let listener = crate::net::bind_fresh(&sock_dir.join("qy.sock"))?;
    for conn in listener.incoming() {
        let mut conn = conn?;
        loop {
            let frame = match wire::read_frame(&mut conn) {
                Ok(f) => f,
                Err(_) => break,
            };
            b("qy_frame", "entry");
            let action = match frame.tag {
                wire::TAG_QUERY => {
                    b("qy_frame", "tag_q");
                    let digest = crate::net::payload_digest(&frame.payload);
                    let _busy = sentinel::busy_begin(QUERY, &digest);
                    match String::from_utf8(frame.payload) {
                        Ok(sql) => handle_statement(&sql, &mut backend),
                        Err(_) => QyAction::Reply(Frame::error("query is not utf-8")),
                    }
                }
                wire::TAG_CONTROL => {
                    b("qy_frame", "tag_c");
                    handle_control(&frame.payload, &mut backend)
                }
                wire::TAG_SHUTDOWN => {
                    b("qy_frame", "tag_x");
                    let _ = backend.round_trip(&Frame::new(wire::TAG_SHUTDOWN, Vec::new()));
                    let _ = wire::write_frame(&mut conn, &Frame::result("bye"));
                    return Ok(());
                }
                _ => {
                    b("qy_frame", "tag_bad");
                    QyAction::Reply(Frame::error("unexpected frame"))
                }
            };
            match action {
                QyAction::Reply(f) => wire::write_frame(&mut conn, &f)?,
                QyAction::DepLost(dep) => sentinel::dep_lost(QUERY, dep),
            }
        }
    }
    Ok(())
}
