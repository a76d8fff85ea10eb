//! Library surface of the `stance` CLI. Commands live here so the whole
//! pipeline can be driven from integration tests as well as the binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod runspec;

use anyhow::Result;

use args::{Cli, Command};

/// Dispatch a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Elicit(args) => commands::elicit::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::SweepAlpha(args) => commands::sweep::run_alpha(args),
        Command::SweepSize(args) => commands::sweep::run_size(args),
        Command::Report(args) => commands::report::run(args),
        Command::Fixture(args) => {
            let (train, test) = stance_core::fixtures::write_semeval_fixture(&args.out)?;
            println!("fixture corpus -> {} and {}", train.display(), test.display());
            Ok(0)
        }
    }
}
