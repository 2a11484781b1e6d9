//! Command-line harness over `cfx-core`.
//!
//! Every command writes flat JSON/CSV files plus `config.json` and a
//! `manifest.json` holding SHA-256 digests of each output.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod pipeline;

pub use args::Cli;
pub use error::{CliError, CliResult};

use args::Command;

/// Runs one command. `Ok(false)` means a verification suite failed.
pub fn run(cli: &Cli) -> CliResult<bool> {
    match &cli.command {
        Command::Explain(a) => commands::explain(a)?,
        Command::GenCf(a) => commands::gen_cf(a)?,
        Command::MaxSparse(a) => commands::max_sparse(a)?,
        Command::Metrics(a) => commands::metrics(a)?,
        Command::Verify(a) => return commands::verify(a),
        Command::Synth(a) => commands::synth(a)?,
    }
    Ok(true)
}
