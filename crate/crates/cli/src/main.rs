//! `risbf`: dataset generation, training, evaluation and benchmarking for RIS
//! passive beamforming.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use risbf_core::error::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files; exit code 2.
    Usage(String),
    /// Failure while doing the work; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::Argument(_) | CoreError::Format(_) | CoreError::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "risbf", version, about = "RIS passive beamforming toolkit")]
pub struct Cli {
    /// Plain-text `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (falls back to the config file, then RISBF_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override any config key, e.g. `--set snr_db=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a channel dataset file.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train the phase-shift network on a training and a validation dataset.
    Train {
        #[arg(long = "train")]
        train_path: PathBuf,
        #[arg(long = "val")]
        val_path: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Per-epoch history CSV (default: next to the model, `.history.csv`).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Also write a gnuplot script for the loss curves.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare methods on a test dataset.
    Eval {
        #[arg(long)]
        test: PathBuf,
        /// Comma-separated list of closed-form, random, sdr, nn.
        #[arg(long, value_delimiter = ',', default_value = "sdr,random")]
        methods: Vec<String>,
        #[arg(long, default_value = "sdr")]
        reference: String,
        /// Model file, required for `nn`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave timing columns empty so the report is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Time methods per instance at one or more `MxN` configurations.
    Bench {
        /// Comma-separated `MxN` list, e.g. `4x32,2x8`.
        #[arg(long, value_delimiter = ',', required = true, num_args = 0..)]
        configs: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "nn,sdr")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Model path; `{m}` and `{n}` are replaced per configuration. Without
        /// it `nn` is timed on a freshly initialized network of the same shape.
        #[arg(long)]
        model: Option<String>,
        /// Method whose latency the speedup column is relative to.
        #[arg(long, default_value = "sdr")]
        baseline: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate methods across a range of N or M.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "sdr,random")]
        methods: Vec<String>,
        #[arg(long, default_value = "sdr")]
        reference: String,
        /// Model path template with `{m}` and `{n}` placeholders, required for `nn`.
        #[arg(long)]
        model: Option<String>,
        /// Test instances per point (overrides `count`).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Gnuplot script path; the image is written next to it as `.png`.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Channel coherence time for a user speed and carrier frequency.
    Coherence {
        /// Maximum user speed in m/s.
        #[arg(long, default_value_t = 1.5)]
        speed: f64,
        /// Carrier frequency in Hz.
        #[arg(long, default_value_t = 2.6e9)]
        carrier: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    N,
    M,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) | CliError::Runtime(m) => m,
            };
            eprintln!("risbf: error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
