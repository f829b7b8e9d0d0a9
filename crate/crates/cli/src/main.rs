//! `ewens-clt`: command-line driver for the cycle-statistics experiments.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ewens-clt", version, about = "Ewens permutations, class functions and their Gaussian limits")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "EWENS_CLT_OUT", default_value = ".")]
    out: PathBuf,

    /// Worker threads (default: available parallelism). Results do not
    /// depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample cycle counts and compare with the exact law.
    Sample(SampleArgs),
    /// Centering constant and limiting covariance for a circle function.
    Limit(LimitArgs),
    /// Monte Carlo moments and characteristic functions of the statistic.
    Clt(ConfigArgs),
    /// Star discrepancy of {m t}, decay fit and finite-type scan.
    Discrepancy(DiscrepancyArgs),
    /// Wasserstein distances to the Gaussian limit and their trend in n.
    Wasserstein(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=100_000_000))]
    pub n: u64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// JSON file with a circle function: {"label", "coeffs": [[re, im], ...], "zeros": [[p, q, mult], ...]}.
    #[arg(long)]
    pub function: PathBuf,
    /// `golden`, `sqrt2`, `e-frac`, `rational p/q` (or `p/q`) or `cf:a1,a2,...`.
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    /// As `--x` of `limit`; `decimal:<value>` is also accepted here.
    #[arg(long)]
    pub t: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=100_000_000))]
    pub n: u64,
    /// Exponent of the finite-type certificate; scanned when given with `--k`.
    #[arg(long, requires = "k")]
    pub gamma: Option<f64>,
    #[arg(long, requires = "gamma")]
    pub k: Option<f64>,
    /// Also write the sequence as `sequence.csv`.
    #[arg(long)]
    pub sequence: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Hypothesis(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Hypothesis(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Hypothesis(m) => write!(f, "hypothesis violation: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ewens_clt::Error> for CliError {
    fn from(e: ewens_clt::Error) -> Self {
        use ewens_clt::Error as E;
        match e {
            E::InvalidArgument(_) | E::Refused(_) => CliError::Usage(e.to_string()),
            E::InfiniteValue { .. }
            | E::ZeroOnCircle { .. }
            | E::HypothesisViolation(_)
            | E::Precondition { .. }
            | E::SingularCovariance { .. } => CliError::Hypothesis(e.to_string()),
            E::Quadrature { .. } => CliError::Other(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("{}", CliError::Usage("--threads must be at least 1".into()));
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("{}", CliError::Other(e.to_string()));
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Sample(a) => commands::sample(a, &cli.out),
        Command::Limit(a) => commands::limit(a, &cli.out),
        Command::Clt(a) => commands::clt(a, &cli.out),
        Command::Discrepancy(a) => commands::discrepancy(a, &cli.out),
        Command::Wasserstein(a) => commands::wasserstein(a, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
