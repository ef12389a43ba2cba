mod cache;
mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use muscle_core::{ColumnSelector, IntervalSystem};

/// Multiscale quantile segmentation.
#[derive(Debug, Parser)]
#[command(name = "muscle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a series and report change points and fitted quantiles.
    Fit(FitArgs),
    /// Fill the calibration cache for series of a given length.
    Calibrate(CalibrateArgs),
    /// Run repeated fits on a simulated scenario and score them.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Quantile level of a single-level fit.
    #[arg(long, conflicts_with = "betas")]
    beta: Option<f64>,
    /// Strictly increasing comma-separated levels for a joint fit.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Error level of the multiscale test.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Subinterval system: all or dyadic.
    #[arg(long, default_value = "dyadic")]
    intervals: IntervalSystem,
    /// Monte-Carlo replicates per calibrated length.
    #[arg(long, default_value_t = 5000)]
    mc_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Calibration cache file, created when missing.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Timing and cache diagnostics on stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Data file: one value per line, or delimited with --column.
    #[arg(long)]
    input: PathBuf,
    /// Column of delimited input, by 1-based index or header name.
    #[arg(long)]
    column: Option<ColumnSelector>,
    /// Piece size of the split-and-merge search; 0 fits the whole series at once.
    #[arg(long, default_value_t = 0)]
    split: usize,
    /// JSON result file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// SVG plot of data, fit and change points.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Series length to calibrate for.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    length: Option<usize>,
    /// Take the length from this data file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    column: Option<ColumnSelector>,
    /// Recompute cached lengths and fail on any mismatch.
    #[arg(long)]
    verify: bool,
    /// JSON dump of the resulting tables; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// One of E1..E5, teeth, blocks, windowing, null.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    split: usize,
    /// Per-replicate metrics as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON aggregate; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure with its process exit status.
#[derive(Debug)]
pub(crate) enum CliError {
    /// Unreadable or unparsable input data.
    Input(String),
    /// Invalid flags or flag combinations.
    Usage(String),
    /// Corrupt or conflicting calibration cache.
    Cache(String),
    /// Writing results failed.
    Output(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Usage(_) => 64,
            CliError::Cache(_) => 65,
            CliError::Internal(_) => 70,
            CliError::Output(_) => 74,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Usage(m)
            | CliError::Cache(m)
            | CliError::Output(m)
            | CliError::Internal(m) => m,
        }
    }
}

impl From<muscle_core::MuscleError> for CliError {
    fn from(e: muscle_core::MuscleError) -> Self {
        use muscle_core::MuscleError as E;
        let msg = e.to_string();
        match e {
            E::DataParse { .. } => CliError::Input(msg),
            E::CacheParse { .. } | E::CacheConflict { .. } => CliError::Cache(msg),
            E::InvalidInput(_) | E::InvalidQuery(_) => CliError::Usage(msg),
            E::InfeasibleSegment { .. } | E::TableMismatch(_) => CliError::Internal(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
