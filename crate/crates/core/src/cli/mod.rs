//! The `fbmatch` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 dimension or validation error.
//!
//! Any subcommand accepts `--config FILE`: a line-based `key=value` file
//! (`#` starts a comment) whose keys are long flag names without the dashes.
//! Flags given on the command line take precedence over the file.

mod bench;
mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};

use crate::error::Error;

pub use bench::{run_bench, BenchArgs, BenchKind, BenchRow, BENCH_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Environment variable capping the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "FBMATCH_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_io() => EXIT_IO,
            CliError::Lib(_) => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fbmatch", version, about = "Foreground-background embedding matching toolkit")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute global and multi-local matching maps for one object.
    Match(commands::MatchArgs),
    /// Time dense versus atrous matching on synthetic data.
    Bench(BenchArgs),
    /// Propagate reference labels through a sequence by nearest-neighbor matching.
    Propagate(commands::PropagateArgs),
    /// Score predicted masks against ground truth (J, F, J&F).
    Eval(commands::EvalArgs),
    /// Balanced random crop of a frame sequence.
    Crop(commands::CropArgs),
    /// Print header fields of FBT tensors and PGM masks.
    Info(commands::InfoArgs),
}

/// Shared `--config` flag; the file itself is expanded before parsing.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArg {
    /// key=value file with defaults for the other flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    if n > 0 {
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Match(a) => commands::cmd_match(&a),
        Command::Bench(a) => bench::cmd_bench(&a),
        Command::Propagate(a) => commands::cmd_propagate(&a),
        Command::Eval(a) => commands::cmd_eval(&a),
        Command::Crop(a) => commands::cmd_crop(&a),
        Command::Info(a) => commands::cmd_info(&a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
