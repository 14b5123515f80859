//! Batch driver: load a problem definition, run estimator sweeps and
//! verification suites, emit tables or machine-readable reports.
//!
//! Exit codes: 0 pass, 1 failure, 2 indeterminate, 64 usage/config error.
//! Identical config and seed must produce byte-identical output, so nothing
//! here may consult the clock, the environment, or unordered maps.

mod commands;
mod config;

use std::fmt::Display;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Suite;
use config::{Problem, ProblemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unresolvable names, malformed config: exit 64.
    Usage(String),
    /// The computation itself failed: exit 1.
    Run(String),
}

impl CliError {
    fn usage(msg: impl Display) -> CliError {
        CliError::Usage(msg.to_string())
    }

    fn run(msg: impl Display) -> CliError {
        CliError::Run(msg.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "affinelab",
    version,
    about = "Numerical laboratory for affine connections on chart domains"
)]
struct Cli {
    /// Problem definition (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Overrides the seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Pass/fail bound where the command applies one
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Write the report to this file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the symmetric product of two fields along flow-composition
    /// curves and compare with the symbolic value
    Symprod {
        /// Two comma-separated field names from the config
        #[arg(long)]
        fields: Option<String>,
        /// Comma-separated chart coordinates of the base point
        #[arg(long)]
        point: Option<String>,
        /// Comma-separated curve kinds (u1, u2, u3, u4, u3z, u4z)
        #[arg(long)]
        kinds: Option<String>,
    },
    /// Run the identity / BCH / transport property suites
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Three-way geodesic-invariance verdict for a distribution
    Invariance {
        /// Catalog connection overriding the configured one
        #[arg(long)]
        connection: Option<String>,
        /// Distribution name from the config
        #[arg(long)]
        distribution: Option<String>,
    },
    /// Error ladder under step halving for one estimator
    Convergence {
        /// Curve kind (u1..u4z) or "bracket"
        #[arg(long, default_value = "u1")]
        target: String,
    },
}

fn load_problem(cli: &Cli) -> Result<Problem, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::usage("this command needs --config PATH"))?;
    let cfg = ProblemConfig::load(path).map_err(CliError::usage)?;
    cfg.build().map_err(CliError::usage)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let (text, code) = match &cli.command {
        Command::Symprod {
            fields,
            point,
            kinds,
        } => {
            let problem = load_problem(cli)?;
            commands::cmd_symprod(
                &problem,
                fields.as_deref(),
                point.as_deref(),
                kinds.as_deref(),
                cli.tolerance,
                cli.format,
            )?
        }
        Command::Verify { suite } => {
            // the suites draw their own problems, so the config is optional
            // and only consulted for its seed
            let seed = match cli.seed {
                Some(s) => s,
                None => match &cli.config {
                    Some(path) => {
                        ProblemConfig::load(path)
                            .map_err(CliError::usage)?
                            .probes
                            .seed
                    }
                    None => 0,
                },
            };
            commands::cmd_verify(*suite, seed, cli.format)?
        }
        Command::Invariance {
            connection,
            distribution,
        } => {
            let problem = load_problem(cli)?;
            commands::cmd_invariance(
                &problem,
                connection.as_deref(),
                distribution.as_deref(),
                cli.seed,
                cli.tolerance,
                cli.format,
            )?
        }
        Command::Convergence { target } => {
            let problem = load_problem(cli)?;
            commands::cmd_convergence(&problem, target, cli.format)?
        }
    };

    match &cli.out {
        None => print!("{text}"),
        Some(path) => fs::write(path, &text)
            .map_err(|e| CliError::run(format!("cannot write {}: {e}", path.display())))?,
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(64)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
