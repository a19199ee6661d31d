//! `frogscan`: segment, train, scan, evaluate and calibrate from the shell.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "frogscan",
    version,
    about = "Frog-call detection and presence-absence estimation"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "FROGSCAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; a seed is drawn and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Comma-separated per-species thresholds, overriding the config.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find candidate call segments and write them as CSV.
    Segment {
        #[arg(required = true)]
        audio: Vec<PathBuf>,
        /// Output file (standard output when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train one model per species from a labels CSV.
    Train {
        /// CSV with columns file,species_code,start_s,end_s.
        #[arg(long)]
        labels: PathBuf,
        /// Model store directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Detect calls and estimate presence per sample window.
    Scan {
        #[arg(required = true)]
        audio: Vec<PathBuf>,
        /// Model store directory.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Directory for detections.csv and presence.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cross-validate on labelled calls and report weighted error rates.
    Evaluate {
        #[arg(long)]
        labels: PathBuf,
        /// Directory for wer.csv, confusion.csv and scores.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// One-vs-all ROC curves and a suggested threshold vector.
    Roc {
        /// scores.csv written by `evaluate`.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        max_fpr: Option<f64>,
        /// Directory for roc.csv and thresholds.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render synthetic recordings with known ground truth.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Render a JSON scene script to a WAV file.
    Scene {
        #[arg(long)]
        script: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Ground-truth labels CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 48_000)]
        sample_rate: u32,
    },
    /// Write one WAV of calls per species plus labels.csv.
    Corpus {
        #[arg(long)]
        out_dir: PathBuf,
        /// Species codes from the built-in roster.
        #[arg(long, value_delimiter = ',', default_value = "s01,s02,s03,s04,s05")]
        species: Vec<String>,
        /// Seconds of calls per species.
        #[arg(long, default_value_t = 20.0)]
        seconds: f64,
        #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 48_000)]
        sample_rate: u32,
    },
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
