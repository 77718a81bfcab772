//! `framestack`: generate synthetic long-tailed datasets, train and
//! evaluate heads with resampling/re-weighting policies, and render
//! comparison tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//! Diagnostics go to stderr; data (tables, reports) goes to stdout.

mod commands;

use clap::{Parser, Subcommand};
use framestack_core::ErrorCategory;

#[derive(Parser)]
#[command(
    name = "framestack",
    version,
    about = "Long-tailed frame-feature classification harness",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic long-tailed dataset (features, manifests,
    /// splits, stats)
    GenData(commands::gen_data::Args),
    /// Train a head on a generated dataset
    Train(commands::train::Args),
    /// Evaluate a checkpoint on a manifest
    Eval(commands::eval::Args),
    /// Render a comparison table from run histories or metric reports
    Report(commands::report::Args),
    /// Run a declarative sweep and consolidate the results
    Compare(commands::compare::Args),
    /// Summarize a feature file, checkpoint, or manifest
    Inspect(commands::inspect::Args),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Report(args) => commands::report::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
    };

    if let Err(err) = result {
        eprintln!("error: {err}");
        let code = match err.category() {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numeric => 3,
        };
        std::process::exit(code);
    }
}
