//! `webmine` — command-line pipeline over the web-usage-mining engine:
//! generate synthetic farm traffic, enrich pageviews into sessions, train
//! and evaluate the prediction tasks, and detect per-server load-time
//! anomalies.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error,
//! 3 I/O or internal error.

mod commands;
mod kvfile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "webmine", version, about = "Web usage mining pipeline at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic pageview/session traffic for a simulated web farm
    Generate(GenerateArgs),
    /// Aggregate a pageview CSV into an enriched session CSV
    Enrich(EnrichArgs),
    /// Train a prediction model on enriched sessions
    Train(TrainArgs),
    /// Evaluate a model configuration on a held-out split and report metrics
    Evaluate(EvaluateArgs),
    /// Per-server isolation-forest anomaly detection on page load times
    DetectAnomalies(DetectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scale preset
    #[arg(long, value_parser = ["paper-day", "paper-week", "paper-month", "desk"],
          conflicts_with_all = ["users", "days"])]
    preset: Option<String>,
    /// Number of simulated users (with --days, instead of a preset)
    #[arg(long)]
    users: Option<u32>,
    /// Number of simulated days
    #[arg(long)]
    days: Option<u32>,
    /// Web farm size (1..=10)
    #[arg(long)]
    servers: Option<u8>,
    /// Master seed; fully determines the output (default 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Exit-label noise rate ε ∈ [0, 0.5)
    #[arg(long)]
    noise: Option<f64>,
    /// key = value config file; flags override file entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnrichArgs {
    /// Input pageview CSV
    #[arg(long)]
    pageviews: PathBuf,
    /// Output session CSV
    #[arg(long)]
    out: PathBuf,
    /// Optional exit-event table (Session_ID,Exit_Method); sessions without
    /// an entry get exit method 0
    #[arg(long)]
    exits: Option<PathBuf>,
    /// Read and write ISO 8601 timestamps instead of MM.DD.YYYY HH:MM
    #[arg(long)]
    iso: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Prediction task
    #[arg(value_parser = ["exit-method", "last-service", "service-access"])]
    task: String,
    /// Enriched session CSV
    #[arg(long)]
    sessions: PathBuf,
    /// Model family
    #[arg(long, value_parser = ["cart", "rf", "gb", "lr", "svm"])]
    model: String,
    /// Target service for service-access
    #[arg(long, default_value = "mail")]
    service: String,
    /// Hyperparameter grid file (`param = v1, v2, ...` lines) enabling
    /// 5-fold cross-validated search
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Model file to write; a training report lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Enriched session CSV
    #[arg(long)]
    sessions: PathBuf,
    /// Held-out test fraction
    #[arg(long, default_value_t = 0.3)]
    split: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Report output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Input pageview CSV
    #[arg(long)]
    pageviews: PathBuf,
    /// Assumed anomalous fraction per server, in (0, 0.5)
    #[arg(long, default_value_t = 0.02)]
    contamination: f64,
    /// Also apply the one-standard-deviation baseline rule and report both
    /// flag sets
    #[arg(long)]
    baseline: bool,
    /// Trees per forest
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Subsample size ψ per tree
    #[arg(long, default_value_t = 256)]
    subsample: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (report CSV + one SVG per server)
    #[arg(long)]
    out: PathBuf,
}

/// A post-parse usage problem (missing/conflicting flags); exits with 1
/// like clap's own errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code_for(error: &anyhow::Error) -> u8 {
    if error.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    for cause in error.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if let Some(core) = cause.downcast_ref::<webmine_core::Error>() {
            return match core {
                webmine_core::Error::Io { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Enrich(args) => commands::enrich(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::DetectAnomalies(args) => commands::detect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
