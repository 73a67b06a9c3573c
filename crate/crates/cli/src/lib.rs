//! Batch workflows around the `nameorigin` library.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 input-format
//! error, 4 numerical-check failure.

mod commands;
pub mod config;
mod meta;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use meta::{fnv1a64, Metadata, METADATA_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical check failed: {m}"),
        }
    }
}

impl From<nameorigin::Error> for CliError {
    fn from(e: nameorigin::Error) -> Self {
        use nameorigin::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidWeights(_) => CliError::Usage(e.to_string()),
            E::Diverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nameorigin", version, about = "Name-origin classification workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a classifier on a labeled-names CSV
    Train(TrainArgs),
    /// Score a model on a labeled-names CSV
    Evaluate(EvaluateArgs),
    /// Write class probabilities for a names CSV
    Classify(ClassifyArgs),
    /// Map leaf-nationality vectors to origins and keep confident pseudo-labels
    Filter(FilterArgs),
    /// Prevalence series over classified inventor records
    Aggregate(AggregateArgs),
    /// Finite-difference check of all analytic gradients
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with `classes = [...]` and optional `non_western = [...]`
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// comma-separated hidden sizes, e.g. 512,256,64
    #[arg(long, value_delimiter = ',')]
    lstm_sizes: Option<Vec<usize>>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// retrain on every row for the selected epoch count
    #[arg(long)]
    final_fit: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a `name` column
    #[arg(long)]
    names: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    leaf_data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// denominator of the retained fraction; the held-out size by default
    #[arg(long)]
    baseline_size: Option<usize>,
    /// TOML with `selection = [..4]` and optional `schemes = [[..4], ...]`
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long)]
    inventors: PathBuf,
    #[arg(long, value_parser = ["country", "tech_field", "region", "global"])]
    group_by: String,
    #[arg(long)]
    out: PathBuf,
    /// computes probabilities when the inventor CSV has no p_k columns
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSV `country,region`, needed for --group-by region
    #[arg(long)]
    regions: Option<PathBuf>,
    /// CSV `group,origin` naming each group's dominant origin
    #[arg(long)]
    dominant: Option<PathBuf>,
    /// CSV `origin,country` listing home countries for the domestic/abroad split
    #[arg(long)]
    homes: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = config::DEFAULT_SEED)]
    seed: u64,
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Classify(a) => commands::classify(a),
        Command::Filter(a) => commands::filter(a),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("nameorigin: {e}");
            e.exit_code()
        }
    }
}
