use clap::Parser;

use airground::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
