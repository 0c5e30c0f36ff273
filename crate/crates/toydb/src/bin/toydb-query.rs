use std::path::PathBuf;
use std::process::exit;

fn main() {
    toydb::instr::init_process(toydb::instr::QUERY);
    toydb::sentinel::register_process(toydb::instr::QUERY, "server");
    let dir = match std::env::var_os("TOYDB_SOCK_DIR") {
        Some(d) => PathBuf::from(d),
        None => {
            eprintln!("toydb-query: TOYDB_SOCK_DIR is not set");
            exit(2);
        }
    };
    if let Err(e) = toydb::query::run_query(&dir) {
        eprintln!("toydb-query: {e}");
        exit(1);
    }
}
