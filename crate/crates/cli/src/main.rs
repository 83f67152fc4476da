mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spectral_relevance::net::SYNTHETIC_WEIGHT_DECAY;
use spectral_relevance::Error as CoreError;

/// Spectral relevance toolkit: synthetic data, training, attribution in
/// time, frequency and time-frequency domains, and benchmark evaluation.
#[derive(Debug, Parser)]
#[command(name = "specrel", version)]
struct Cli {
    /// Worker threads for sample-level parallelism (1 runs sequentially).
    /// Results do not depend on this value.
    #[arg(long, global = true, env = "SPECREL_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic frequency-detection dataset.
    Synth(SynthArgs),
    /// Train an MLP classifier on a dataset.
    Train(TrainArgs),
    /// Compute relevance maps for individual signals.
    Attribute(AttributeArgs),
    /// Run the localization, feature-flipping and complexity benchmark.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// baseline, noisy, desk or desk-noisy.
    #[arg(long, default_value = "desk", env = "SPECREL_PRESET")]
    pub preset: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0, env = "SPECREL_SEED")]
    pub seed: u64,
    #[arg(long, env = "SPECREL_SAMPLES")]
    pub samples: Option<usize>,
    /// Signal length N.
    #[arg(long)]
    pub length: Option<usize>,
    /// Comma-separated candidate frequencies.
    #[arg(long)]
    pub k_star: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// `fixed:A` or `uniform:LO:HI`.
    #[arg(long)]
    pub amplitude: Option<String>,
    /// Only draw labels with exactly this many active frequencies.
    #[arg(long)]
    pub subset_only: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Defaults to `<model-out>.metrics.json`.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    #[arg(long, default_value = "256,256")]
    pub hidden: String,
    #[arg(long, default_value_t = 4, env = "SPECREL_EPOCHS")]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "adam")]
    pub optimizer: String,
    #[arg(long, default_value_t = SYNTHETIC_WEIGHT_DECAY)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0, env = "SPECREL_SEED")]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of signals, one per row.
    #[arg(long, conflicts_with = "data")]
    pub input: Option<PathBuf>,
    /// Dataset file; pick signals with --index.
    #[arg(long, requires = "index")]
    pub data: Option<PathBuf>,
    /// Comma-separated sample indices into --data.
    #[arg(long)]
    pub index: Option<String>,
    /// Comma-separated: lrp, ig, gxi, sensitivity.
    #[arg(long, default_value = "lrp")]
    pub method: String,
    /// time, frequency, time-frequency, or tf:SHAPE:WIDTH[:HOP].
    #[arg(long, default_value = "frequency")]
    pub domain: String,
    /// Window for --domain time-frequency: rect, halfsine or hann.
    #[arg(long, default_value = "rect")]
    pub window: String,
    /// Window width H; defaults to N/10.
    #[arg(long)]
    pub width: Option<usize>,
    /// Hop D; defaults to H.
    #[arg(long)]
    pub hop: Option<usize>,
    /// Explained class; defaults to the predicted class.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, default_value_t = spectral_relevance::attribution::DEFAULT_IG_STEPS)]
    pub ig_steps: usize,
    /// Include the bias in LRP denominators.
    #[arg(long)]
    pub lrp_bias: bool,
    /// ε of the LRP-ε rule on dense layers, relative to the mean |denominator|.
    #[arg(long, default_value_t = spectral_relevance::attribution::DEFAULT_DENSE_EPSILON)]
    pub lrp_epsilon: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write SVG heatmaps of time-frequency maps.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "lrp,ig,gxi,sensitivity")]
    pub methods: String,
    /// Comma-separated; widths may be written as N/d.
    #[arg(long, default_value = "time,frequency,tf:rect:N/10,tf:rect:N/4,tf:rect:N/2")]
    pub domains: String,
    /// Number of held-out signals to evaluate.
    #[arg(long, default_value_t = 500, env = "SPECREL_EVAL_SAMPLES")]
    pub samples: usize,
    /// Held-out tail of the dataset; must match training.
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = spectral_relevance::attribution::DEFAULT_IG_STEPS)]
    pub ig_steps: usize,
    /// Include the bias in LRP denominators.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub lrp_bias: bool,
    #[arg(long)]
    pub no_flip: bool,
    #[arg(long, default_value_t = spectral_relevance::eval::DEFAULT_GRID_POINTS)]
    pub flip_points: usize,
    /// Labels left out of feature flipping.
    #[arg(long, default_value = "0")]
    pub exclude_labels: String,
    #[arg(long)]
    pub no_random_baseline: bool,
    #[arg(long, default_value_t = 0, env = "SPECREL_SEED")]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Invalid flag values found after argument parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<CoreError>() {
        return match e {
            CoreError::Config(_)
            | CoreError::InvalidWindow(_)
            | CoreError::InvalidClass { .. }
            | CoreError::UnsupportedDomain(_) => 2,
            e if e.is_data_error() => 3,
            _ => 4,
        };
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::configure_jobs(cli.jobs).and_then(|exec| match &cli.command {
        Command::Synth(a) => commands::synth(a, exec, cli.jobs),
        Command::Train(a) => commands::train(a, cli.jobs),
        Command::Attribute(a) => commands::attribute(a, cli.jobs),
        Command::Evaluate(a) => commands::evaluate(a, exec, cli.jobs),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
