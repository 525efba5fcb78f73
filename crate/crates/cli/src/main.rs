mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use missbeam_core::eval::SpeedErrorKind;
use missbeam_core::models::Architecture;
use serde::{Deserialize, Serialize};

/// Regress missing DVL beams from past measurements and the beams still
/// available.
#[derive(Debug, Parser)]
#[command(name = "missbeam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Convert recordings into the canonical CSV and write a mission split.
    Ingest(IngestArgs),
    /// Train one regressor per missing-beam combination.
    Train(TrainArgs),
    /// Score fillers and trained models on the test missions.
    Evaluate(EvaluateArgs),
    /// Window-size sweep or random hyperparameter search.
    Sweep(SweepArgs),
    /// Render tables and plots from earlier JSON outputs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    Sinusoidal,
    Lawnmower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Window,
    Hyper,
}

pub fn parse_architecture(s: &str) -> Result<Architecture, String> {
    match s {
        "lstm" => Ok(Architecture::LstmMultihead),
        "cnn" => Ok(Architecture::CnnMultihead),
        "lstm_a" | "lstm-a" => Ok(Architecture::LstmSinglehead),
        "cnn_a" | "cnn-a" => Ok(Architecture::CnnSinglehead),
        other => other.parse().map_err(|e: missbeam_core::Error| e.to_string()),
    }
}

fn parse_speed_error(s: &str) -> Result<SpeedErrorKind, String> {
    s.parse().map_err(|e: missbeam_core::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON file with defaults for any option below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<ProfileKind>,
    /// Epochs per mission (1 Hz).
    #[arg(long)]
    duration: Option<usize>,
    #[arg(long)]
    missions: Option<usize>,
    /// Beam-velocity noise standard deviation, m/s.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    pitch_deg: Option<f64>,
    /// Full scenario document; replaces the profile options.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Share of missions assigned to training in split.json.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// A file, or a directory holding one recording per file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `canonical` or `columns`.
    #[arg(long)]
    format: Option<String>,
    /// Column mapping document for `--format columns`.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Existing split manifest to validate and copy.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Network and optimizer options shared by `train` and `sweep`.
#[derive(Debug, Args, Serialize)]
pub struct ModelFlags {
    /// lstm, cnn, lstm_a or cnn_a.
    #[arg(long = "arch", value_parser = parse_architecture)]
    architecture: Option<Architecture>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lstm_output: Option<usize>,
    /// Hidden fully connected widths, comma-separated.
    #[arg(long, value_delimiter = ',')]
    fc: Option<Vec<usize>>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Feed depth as an extra input channel.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    depth: Option<bool>,
    /// Feed the previous velocity vectors as extra input channels.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    velocity: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Canonical CSV file or directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Split manifest; training uses its `train` side.
    #[arg(long)]
    split: Option<PathBuf>,
    /// One set such as `1,2`, several separated by `;`, or
    /// all/one/two/three.
    #[arg(long)]
    missing: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Split manifest; evaluation uses its `test` side.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Directory holding `model_<beams>.json` files.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Comma-separated: average, virtual, three_beam, missbeamnet.
    #[arg(long)]
    methods: Option<String>,
    /// Same syntax as `train --missing`.
    #[arg(long)]
    combinations: Option<String>,
    #[arg(long)]
    average_window: Option<usize>,
    /// vector_norm or magnitude.
    #[arg(long, value_parser = parse_speed_error)]
    speed_error: Option<SpeedErrorKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the human-readable table instead of CSV.
    #[arg(long)]
    #[serde(skip)]
    pretty: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<SweepKind>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Split manifest; without one the missions are split by `--train-fraction`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// A single missing-beam set.
    #[arg(long)]
    missing: Option<String>,
    #[arg(long)]
    min_window: Option<usize>,
    #[arg(long)]
    max_window: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pretty: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// `report.json` from `evaluate`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// `window_sweep.json` from `sweep --kind window`.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
