//! Storage process: owns the catalog, executes canonical statements.

use std::io;

use crate::catalog::Database;
use crate::engine::execute;
use crate::instr::{hit_block, STORAGE};
use crate::sentinel;
use crate::wire::{self, Frame};

fn b(function: &'static str, block: &'static str) {
    hit_block(STORAGE, function, block);
}

pub fn handle_control(db: &mut Database, payload: &[u8]) -> Frame {
    let _f = sentinel::frame("toydb-storage!st_handle_c");
    b("st_handle_c", "entry");
    match payload {
        b"ping" => {
            b("st_handle_c", "c_ping");
            Frame::result("pong")
        }
        b"drop" => {
            b("st_handle_c", "c_drop");
            db.clear();
            Frame::result("dropped")
        }
        _ => {
            b("st_handle_c", "c_unknown");
            Frame::error("unknown control")
        }
    }
}

pub fn handle_plan(db: &mut Database, sql: &str) -> Frame {
    match execute(db, sql) {
        Ok(text) => Frame::result(text),
        Err(msg) => Frame::error(msg),
    }
}

pub fn run_storage(sock_dir: &std::path::Path) -> io::Result<()> {
    let _f = sentinel::frame("toydb-storage!st_main");
    b("st_main", "boot");
    let listener = crate::net::bind_fresh(&sock_dir.join("st.sock"))?;
    let mut db = Database::new();
    for conn in listener.incoming() {
        let mut conn = conn?;
        loop {
            let frame = match wire::read_frame(&mut conn) {
                Ok(f) => f,
                Err(_) => break,
            };
            b("st_frame", "entry");
            let reply = match frame.tag {
                wire::TAG_PLAN => {
                    b("st_frame", "tag_p");
                    let digest = crate::net::payload_digest(&frame.payload);
                    let _busy = sentinel::busy_begin(STORAGE, &digest);
                    match std::str::from_utf8(&frame.payload) {
                        Ok(sql) => handle_plan(&mut db, sql),
                        Err(_) => Frame::error("plan is not utf-8"),
                    }
                }
                wire::TAG_CONTROL => {
                    b("st_frame", "tag_c");
                    handle_control(&mut db, &frame.payload)
                }
                wire::TAG_SHUTDOWN => {
                    b("st_frame", "tag_x");
                    let _ = wire::write_frame(&mut conn, &Frame::result("bye"));
                    return Ok(());
                }
                _ => {
                    b("st_frame", "tag_bad");
                    Frame::error("unexpected frame")
                }
            };
            wire::write_frame(&mut conn, &reply)?;
        }
    }
    Ok(())
}
