//! `ranktune` — fine-tune word embeddings with similarity-ranking labels.
//!
//! Exit codes: 0 success, 1 usage errors, 2 unreadable or malformed
//! inputs, 3 numeric/degenerate conditions.

mod args;
mod commands;
mod config;
mod failure;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too and are not failures.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    if let Some(threads) = cli.threads {
        if threads > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
            {
                eprintln!("ranktune: could not configure {threads} threads: {e}");
                std::process::exit(1);
            }
        }
    }

    if let Err(failure) = commands::run(cli) {
        eprintln!("ranktune: {failure}");
        std::process::exit(i32::from(failure.exit_code()));
    }
}
