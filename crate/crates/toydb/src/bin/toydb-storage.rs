use std::path::PathBuf;
use std::process::exit;

fn main() {
    toydb::instr::init_process(toydb::instr::STORAGE);
    toydb::sentinel::register_process(toydb::instr::STORAGE, "server");
    let dir = match std::env::var_os("TOYDB_SOCK_DIR") {
        Some(d) => PathBuf::from(d),
        None => {
            eprintln!("toydb-storage: TOYDB_SOCK_DIR is not set");
            exit(2);
        }
    };
    if let Err(e) = toydb::storage::run_storage(&dir) {
        eprintln!("toydb-storage: {e}");
        exit(1);
    }
}
