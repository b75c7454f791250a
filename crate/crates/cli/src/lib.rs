//! Command-line front end for the emberline wildfire simulator.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or file error, 3 numerical
//! failure.

pub mod commands;
pub mod manifest;
pub mod options;
pub mod snapshot;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::commands::{BenchmarkArgs, CalibrateArgs, RlDemoArgs, RunArgs};
use crate::manifest::Manifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "emberline", version, about = "Cellular-automata wildfire simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate fire spread and write snapshots.
    Run(RunArgs),
    /// Fit spread parameters to an observed burn mask.
    Calibrate(CalibrateArgs),
    /// Measure batched simulation throughput.
    Benchmark(BenchmarkArgs),
    /// Run the fire suppression environment with a baseline or trained policy.
    RlDemo(RlDemoArgs),
}

fn flag_key(arg: &str) -> Option<&str> {
    let rest = arg.strip_prefix("--")?;
    Some(rest.split_once('=').map_or(rest, |(k, _)| k))
}

/// Replaces `--manifest FILE` with the options stored in FILE. Flags given
/// explicitly on the command line take precedence over stored ones.
fn expand_manifest(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = args.iter().position(|a| flag_key(a) == Some("manifest")) else {
        return Ok(args);
    };
    let (path, consumed) = match args[pos].split_once('=') {
        Some((_, p)) => (p.to_string(), 1),
        None => match args.get(pos + 1) {
            Some(p) => (p.clone(), 2),
            None => return Err(CliError::Usage("--manifest needs a file".into())),
        },
    };
    let text = options::read_text(std::path::Path::new(&path))?;
    let m = Manifest::parse(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    let command = args.get(1).cloned().unwrap_or_default();
    if pos < 2 || m.command != command {
        return Err(CliError::Usage(format!(
            "manifest {path} is for `{}`, not `{command}`",
            m.command
        )));
    }
    let mut rest: Vec<String> = args[..pos].to_vec();
    rest.extend(args[pos + consumed..].iter().cloned());
    let given: Vec<String> = rest.iter().filter_map(|a| flag_key(a)).map(String::from).collect();
    rest.extend(m.to_args(&given));
    Ok(rest)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => commands::cmd_run(a),
        Command::Calibrate(a) => commands::cmd_calibrate(a),
        Command::Benchmark(a) => commands::cmd_benchmark(a),
        Command::RlDemo(a) => commands::cmd_rl_demo(a),
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run_cli(args: Vec<String>) -> i32 {
    let args = match expand_manifest(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
