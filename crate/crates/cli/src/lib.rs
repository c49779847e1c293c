//! Command-line front end: ingest, build, query, estimate and bench.

pub mod args;
mod commands;
mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cardindex::Error),
    /// A result failed a cross-check that should always hold.
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cardindex::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) => EXIT_INTERNAL,
            CliError::Core(E::ScanBound { .. } | E::PrefixState(_)) => EXIT_INTERNAL,
            CliError::Core(_) | CliError::Io(_) => EXIT_DATA,
        }
    }
}

/// Runs one invocation, writing the primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a, out),
        Command::Synth(a) => commands::synth(&a, out),
        Command::Workload(a) => commands::workload(&a, out),
        Command::Build(a) => commands::build(&a, out),
        Command::Query(a) => commands::query(&a, out),
        Command::Estimate(a) => commands::estimate(&a, out),
        Command::Bench(a) => commands::bench(&a, out),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
/// Diagnostics go to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
