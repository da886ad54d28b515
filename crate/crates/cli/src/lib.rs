//! Command-line front end for `apt-core`: reads a JSON market file, runs one
//! experiment and writes CSV files plus a short summary.

pub mod commands;
pub mod error;
pub mod output;
pub mod selftest;
pub mod spec;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{Outcome, RunOptions};
pub use error::{CliError, CliResult, ErrorKind};
pub use spec::MarketSpec;

#[derive(Debug, Parser)]
#[command(name = "aptprice", version, about = "Superhedging and indifference pricing in finite APT markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Market file (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Price tolerance for bisection; overrides the market file.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for sampling; overrides the market file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Solve LPs in exact rational arithmetic.
    #[arg(long, global = true)]
    pub rational: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record wall-clock times in `runtime_ms` (makes output nondeterministic).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sign conditions, no-arbitrage check and the quantitative constant.
    CheckArbitrage,
    /// Superreplication price and hedge.
    Superreplicate,
    /// Supremum of expectations over martingale measures.
    DualPrice,
    /// Superreplication prices when only the first n sources trade.
    TruncationCurve,
    /// Optimal hedge for a utility under the superhedging constraint.
    MaximizeUtility,
    /// Seller's indifference price for one utility.
    ReservationPrice,
    /// Indifference prices along a chain of risk-aversion parameters.
    Convergence,
    /// Monte Carlo moment ratios and tail curve.
    MomentCheck,
    /// Built-in cases with known answers.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckArbitrage => "check-arbitrage",
            Command::Superreplicate => "superreplicate",
            Command::DualPrice => "dual-price",
            Command::TruncationCurve => "truncation-curve",
            Command::MaximizeUtility => "maximize-utility",
            Command::ReservationPrice => "reservation-price",
            Command::Convergence => "convergence",
            Command::MomentCheck => "moment-check",
            Command::Selftest => "selftest",
        }
    }
}

/// Runs `command` and writes its tables under `out`.
pub fn run(command: Command, spec: Option<&Path>, out: &Path, opts: &RunOptions) -> CliResult<(Outcome, Vec<PathBuf>)> {
    let outcome = if command == Command::Selftest {
        commands::selftest_cmd(opts)?
    } else {
        let path = spec.ok_or_else(|| CliError::validation(format!("{} needs --spec", command.name())))?;
        let spec = MarketSpec::from_path(path)?;
        match command {
            Command::CheckArbitrage => commands::check_arbitrage(&spec, opts)?,
            Command::Superreplicate => commands::superreplicate_cmd(&spec, opts)?,
            Command::DualPrice => commands::dual_price_cmd(&spec, opts)?,
            Command::TruncationCurve => commands::truncation_curve_cmd(&spec, opts)?,
            Command::MaximizeUtility => commands::maximize_utility_cmd(&spec, opts)?,
            Command::ReservationPrice => commands::reservation_price_cmd(&spec, opts)?,
            Command::Convergence => commands::convergence_cmd(&spec, opts)?,
            Command::MomentCheck => commands::moment_check(&spec, opts)?,
            Command::Selftest => unreachable!(),
        }
    };
    let files = outcome
        .tables
        .iter()
        .map(|t| t.write(out))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((outcome, files))
}
