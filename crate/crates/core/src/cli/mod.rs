//! Batch command-line surface. `run` parses arguments, resolves the
//! configuration and dispatches to one command; it returns the exit code.

mod commands;
mod config;
mod selfcheck;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;
pub use selfcheck::{run_checks, CheckOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "amopt",
    version,
    about = "American option analytics, portfolio construction and backtesting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price every quote at a flat volatility.
    Price,
    /// Solve implied volatility for every quote.
    Iv,
    /// IV plus the five Greeks and the exercise region for every quote.
    Greeks,
    /// Rank contracts and select top/bottom k at each bar.
    Select,
    /// Produce strategy weights.
    Optimize,
    /// Run a strategy and write the report bundle.
    Backtest,
    /// Write a synthetic chain, spot series and true volatilities.
    Synth,
    /// Run the built-in oracle checks.
    Selfcheck {
        /// Lattice steps used by the checks instead of the default.
        #[arg(long)]
        debug_steps: Option<usize>,
    },
}

/// Flags that override config-file keys of the same name.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub chain: Option<PathBuf>,
    #[arg(long, global = true)]
    pub spot: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    #[arg(long, global = true)]
    pub dividend_yield: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub volatility: Option<f64>,
    #[arg(long, global = true)]
    pub liquidity: Option<String>,
    #[arg(long, global = true)]
    pub metric: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    #[arg(long, global = true)]
    pub rebalance_every: Option<usize>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub lower: Option<f64>,
    #[arg(long, global = true)]
    pub upper: Option<f64>,
    #[arg(long, global = true)]
    pub iv_cap: Option<f64>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Price => commands::price(&cfg),
        Command::Iv => commands::iv(&cfg),
        Command::Greeks => commands::greeks(&cfg),
        Command::Select => commands::select(&cfg),
        Command::Optimize => commands::optimize(&cfg),
        Command::Backtest => commands::backtest(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Selfcheck { debug_steps } => selfcheck::cmd_selfcheck(*debug_steps),
    }
}
