//! Gateway process: client-facing front door. Validates raw statements,
//! forwards them to the query process, and post-processes responses.

use std::io;

use crate::instr::{hit_block, GATEWAY};
use crate::query::Backend;
use crate::sentinel::{self, FaultKind};
use crate::wire::{self, Frame};

/// Statements longer than this bounce at the door.
pub const STATEMENT_CAP: usize = 64 * 1024;

fn b(function: &'static str, block: &'static str) {
    hit_block(GATEWAY, function, block);
}

pub enum GwAction {
    Reply(Frame),
    DepLost(&'static str),
}

pub fn handle_query(payload: &[u8], backend: &mut dyn Backend) -> GwAction {
    let _f = sentinel::frame("toydb-gateway!gw_handle_q");
    b("gw_handle_q", "entry");
    if payload.iter().all(|c| c.is_ascii_whitespace()) {
        b("gw_handle_q", "q_empty");
        return GwAction::Reply(Frame::error("empty statement"));
    }
    if payload.len() > STATEMENT_CAP {
        b("gw_handle_q", "q_oversize");
        return GwAction::Reply(Frame::error("statement too long"));
    }
    if std::str::from_utf8(payload).is_err() {
        b("gw_handle_q", "q_bad_utf8");
        return GwAction::Reply(Frame::error("statement is not utf-8"));
    }
    b("gw_handle_q", "q_forward");
    match backend.round_trip(&Frame::new(wire::TAG_QUERY, payload.to_vec())) {
        Err(_) => {
            b("gw_handle_q", "fwd_fail");
            GwAction::DepLost("toydb-query")
        }
        Ok(reply) if reply.tag == wire::TAG_RESULT => {
            b("gw_handle_q", "resp_ok");
            // Response post-processing stage; the marker scan stands in
            // for an escaping bug in it.
            if reply.payload.windows(7).any(|w| w == b"gw_trap") {
                b("gw_handle_q", "trap_fire");
                sentinel::crash(GATEWAY, FaultKind::Segv, "response rewrite overran its buffer");
            }
            b("gw_handle_q", "trap_clear");
            b("gw_handle_q", "reply_ok");
            GwAction::Reply(reply)
        }
        Ok(reply) => {
            b("gw_handle_q", "resp_err");
            b("gw_handle_q", "reply_err");
            GwAction::Reply(Frame::new(wire::TAG_ERROR, reply.payload))
        }
    }
}

pub fn handle_control(payload: &[u8], backend: &mut dyn Backend) -> GwAction {
    let _f = sentinel::frame("toydb-gateway!gw_handle_c");
    b("gw_handle_c", "entry");
    match payload {
        b"ping" => {
            b("gw_handle_c", "c_ping");
            match backend.round_trip(&Frame::new(wire::TAG_CONTROL, b"ping".to_vec())) {
                Ok(reply) => {
                    b("gw_handle_c", "ping_ok");
                    GwAction::Reply(reply)
                }
                Err(_) => {
                    b("gw_handle_c", "ping_fail");
                    GwAction::DepLost("toydb-query")
                }
            }
        }
        b"drop" => {
            b("gw_handle_c", "c_drop");
            match backend.round_trip(&Frame::new(wire::TAG_CONTROL, b"drop".to_vec())) {
                Ok(reply) => {
                    b("gw_handle_c", "drop_ok");
                    GwAction::Reply(reply)
                }
                Err(_) => {
                    b("gw_handle_c", "drop_fail");
                    GwAction::DepLost("toydb-query")
                }
            }
        }
        _ => {
            b("gw_handle_c", "c_unknown");
            GwAction::Reply(Frame::error("unknown control"))
        }
    }
}

/// Serve loop: accepts one client connection at a time over a persistent
/// downstream connection to the query process.
pub fn run_gateway(sock_dir: &std::path::Path) -> io::Result<()> {
    let _f = sentinel::frame("toydb-gateway!gw_main");
    b("gw_main", "boot");
    let query = crate::net::connect_retry(&sock_dir.join("qy.sock"))?;
    let mut backend = crate::query::StreamBackend(query);
    let listener = crate::net::bind_fresh(&sock_dir.join("gw.sock"))?;
    for conn in listener.incoming() {
        let mut conn = conn?;
        loop {
            let frame = match wire::read_frame(&mut conn) {
                Ok(f) => f,
                Err(_) => break,
            };
            b("gw_frame", "entry");
            let action = match frame.tag {
                wire::TAG_QUERY => {
                    b("gw_frame", "tag_q");
                    let digest = crate::net::payload_digest(&frame.payload);
                    let _busy = sentinel::busy_begin(GATEWAY, &digest);
                    handle_query(&frame.payload, &mut backend)
                }
                wire::TAG_CONTROL => {
                    b("gw_frame", "tag_c");
                    handle_control(&frame.payload, &mut backend)
                }
                wire::TAG_SHUTDOWN => {
                    b("gw_frame", "tag_x");
                    let _ = backend.round_trip(&Frame::new(wire::TAG_SHUTDOWN, Vec::new()));
                    let _ = wire::write_frame(&mut conn, &Frame::result("bye"));
                    return Ok(());
                }
                _ => {
                    b("gw_frame", "tag_bad");
                    GwAction::Reply(Frame::error("unexpected frame"))
                }
            };
            match action {
                GwAction::Reply(f) => wire::write_frame(&mut conn, &f)?,
                GwAction::DepLost(dep) => sentinel::dep_lost(GATEWAY, dep),
            }
        }
    }
    Ok(())
}
