//! `kmsbounds` command-line front-end.
//!
//! Exit codes: 0 success, 1 verification failure (or other runtime
//! failure), 2 invalid configuration, 3 size cap exceeded, 4 unsupported
//! model for the command.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SuiteArg;
use config::ModelConfig;
use output::{render, Format};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Cap(String),
    Unsupported(String),
    VerifyFailed,
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::VerifyFailed | CliError::Failure(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "invalid configuration: {m}"),
            CliError::Cap(m) => write!(f, "size cap exceeded: {m}"),
            CliError::Unsupported(m) => write!(f, "unsupported model: {m}"),
            CliError::VerifyFailed => write!(f, "verification failed"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<kmsbounds::Error> for CliError {
    fn from(e: kmsbounds::Error) -> Self {
        use kmsbounds::Error as E;
        match e {
            E::DimensionCap { .. } | E::SubsetCap { .. } | E::RegionTooLarge { .. } | E::OrderCap { .. } => CliError::Cap(e.to_string()),
            E::InvalidSpin(_) | E::NotSubset { .. } | E::ShapeMismatch { .. } | E::NotHermitian(_) | E::EmptyRegion | E::InvalidParameter(_) => {
                CliError::Schema(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "kmsbounds", version, about = "Subcritical inverse-temperature bounds for quantum and classical spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Interaction norms on an (ε, ζ) grid.
    Norms(Common),
    /// β_u with the optimal ε and the ε trace.
    BetaU(Common),
    /// β_u against the comparator bounds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Print the fixed reference comparison table instead.
        #[arg(long)]
        paper_table: bool,
    },
    /// Run randomized verification suites.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
    },
    /// Bounds, norms and optionally the reference table together.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paper_table: bool,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Norms(c) => render(&commands::norms(&ModelConfig::load(&c.config)?)?, c.format()),
        Command::BetaU(c) => render(&commands::beta_u(&ModelConfig::load(&c.config)?)?, c.format()),
        Command::Compare { common: c, paper_table } => render(&commands::compare(&ModelConfig::load(&c.config)?, paper_table)?, c.format()),
        Command::Verify { common: c, suite } => {
            let cfg = ModelConfig::load(&c.config)?;
            let out = commands::verify(&cfg, suite, c.seed.unwrap_or(cfg.seed))?;
            let text = render(&out, c.format())?;
            if out.passed {
                Ok(text)
            } else {
                print!("{text}");
                Err(CliError::VerifyFailed)
            }
        }
        Command::Report { common: c, paper_table } => render(&commands::report(&ModelConfig::load(&c.config)?, paper_table)?, c.format()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kmsbounds: {e}");
            ExitCode::from(e.code())
        }
    }
}
