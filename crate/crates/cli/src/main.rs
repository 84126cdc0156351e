//! `laserclock` experiment runner.
//!
//! Each subcommand writes a CSV table (stdout by default). With `--output`
//! a JSON sidecar echoing the resolved configuration is written next to it,
//! and `--config sidecar.json` reproduces the run.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 usage error, 3 numerical failure.

mod args;
mod commands;
mod config;
mod output;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Track(a) => commands::track(a),
        Command::Sync(a) => commands::sync(a),
        Command::Linewidth(a) => commands::linewidth(a),
        Command::Phasevar(a) => commands::phasevar(a),
        Command::Channel(a) => commands::channel(a),
        Command::Limits(a) => commands::limits(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    if let Err(failure) = outcome {
        eprintln!("laserclock: {failure}");
        std::process::exit(failure.exit_code());
    }
}
