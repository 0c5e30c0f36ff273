use std::path::PathBuf;
use std::process::exit;

fn main() {
    toydb::instr::init_process(toydb::instr::GATEWAY);
    toydb::sentinel::register_process(toydb::instr::GATEWAY, "server");
    let dir = match std::env::var_os("TOYDB_SOCK_DIR") {
        Some(d) => PathBuf::from(d),
        None => {
            eprintln!("toydb-gateway: TOYDB_SOCK_DIR is not set");
            exit(2);
        }
    };
    if let Err(e) = toydb::gateway::run_gateway(&dir) {
        eprintln!("toydb-gateway: {e}");
        exit(1);
    }
}
