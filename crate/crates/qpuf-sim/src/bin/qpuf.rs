//! `qpuf` binary: thin wrapper over the library's CLI dispatcher.

fn main() {
    std::process::exit(qpuf_sim::harness::cli::run(std::env::args()));
}
