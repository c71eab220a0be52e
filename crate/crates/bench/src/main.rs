use clap::Parser;

use gslap_bench::cli::Cli;

fn main() {
    if let Err(e) = gslap_bench::run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
