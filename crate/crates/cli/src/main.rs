mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

/// Local regularity estimation and adaptive smoothing of noisy curves.
///
/// Log verbosity follows the LOCALREG_LOG environment variable
/// (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "localreg", version)]
struct Cli {
    /// JSON file with default values for any option; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum number of worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate learning and online datasets with their noiseless truth.
    Simulate(SimArgs),
    /// Estimate the local regularity from a learning set.
    Estimate(EstimateArgs),
    /// Smooth an online set with the plug-in bandwidth of a regularity estimate.
    Smooth(SmoothArgs),
    /// Smooth an online set with per-curve cross-validated bandwidths.
    Cv(CvArgs),
    /// Monte-Carlo risk and timing of the plug-in smoother (and CV).
    Benchmark(BenchArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct SimArgs {
    /// fbm, piecewise_fbm or integrated_fbm.
    #[arg(long)]
    pub setting: Option<String>,
    /// Hurst exponent; a comma-separated list gives equal-length segments.
    #[arg(long, value_delimiter = ',')]
    pub hurst: Option<Vec<f64>>,
    /// Number of learning curves.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Number of online curves.
    #[arg(long)]
    pub n1: Option<usize>,
    /// Expected number of points per curve (at least 9).
    #[arg(long)]
    pub mu: Option<f64>,
    /// unif or equi.
    #[arg(long)]
    pub sampling: Option<String>,
    /// Noise variance; a comma-separated list gives equal-length segments.
    #[arg(long, value_delimiter = ',')]
    pub sigma2: Option<Vec<f64>>,
    /// Quadrature intervals for integrated fBm.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Times at which the exact truth of online curves is recorded.
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_unit)]
    pub t0: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EstimatorArgs {
    /// Largest derivative order the estimator may reach.
    #[arg(long)]
    pub max_degree: Option<usize>,
    /// Known noise variance (switches to the known-variance estimator).
    #[arg(long)]
    pub known_sigma2: Option<f64>,
    /// local or global successive-difference window for the noise variance.
    #[arg(long)]
    pub sigma2_mode: Option<String>,
    /// nearest or floor rounding of the neighbourhood size.
    #[arg(long)]
    pub k0_rule: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Learning set (CSV `curve_id,t,y` or JSON).
    #[arg(long)]
    pub learning: Option<PathBuf>,
    /// Points at which to estimate.
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_unit)]
    pub t0: Option<Vec<f64>>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Online set (CSV or JSON).
    #[arg(long)]
    pub online: Option<PathBuf>,
    /// Regularity estimate JSON written by `estimate`.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// Evaluation points (default: each curve's observation times).
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_unit)]
    pub t0: Option<Vec<f64>>,
    /// Expected polynomial degree; must match the estimate.
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// Skip the clamp at the trimming threshold.
    #[arg(long)]
    pub no_trim: bool,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub online: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = commands::parse_unit)]
    pub t0: Option<Vec<f64>>,
    /// Local polynomial degree.
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// Number of log-spaced bandwidths between 2/M and 0.5.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Output CSV of estimates (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional JSON file receiving the per-curve scores.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Also run the cross-validation baseline.
    #[arg(long)]
    pub with_cv: bool,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub no_trim: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &file),
        Command::Estimate(a) => commands::estimate(&a, &file),
        Command::Smooth(a) => commands::smooth(&a, &file),
        Command::Cv(a) => commands::cv(&a, &file),
        Command::Benchmark(a) => commands::benchmark(&a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOCALREG_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
