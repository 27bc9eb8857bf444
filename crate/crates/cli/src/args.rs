use std::path::PathBuf;

use ace_core::ace::{Method, DEFAULT_TAU_TOL};
use ace_core::net::DEFAULT_DSD_EPS;
use ace_core::regressor::DEFAULT_MAX_ORDER;
use ace_core::Activation;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Average causal effect attributions for trained neural networks.
///
/// Exit codes: 0 success, 2 bad flags, 3 file or parse error,
/// 4 numerical failure, 5 ill-conditioned fit. `ACE_THREADS` caps the
/// worker pool; `RUST_LOG` sets log verbosity.
#[derive(Debug, Parser)]
#[command(name = "ace", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interventional expectations of one feature over a grid of values.
    Sweep(SweepArgs),
    /// Fit a causal regressor to a sweep and report ACE values.
    Ace(AceArgs),
    /// ACE of every input (and step) at the values of one instance.
    Saliency(SaliencyArgs),
    /// Lookback of a recurrent network at one output step.
    Tau(TauArgs),
    /// Train a network.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Generate the synthetic binary sequence dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Second-order expansion with the full Hessian.
    Exact,
    /// Second-order expansion by directional differences.
    Approx,
    /// Brute-force enumeration over the dataset.
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::ExactTaylor,
            MethodArg::Approx => Method::ApproxDirectional,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

/// Model, data and how expectations are computed.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Network document (JSON).
    #[arg(long)]
    pub net: PathBuf,
    /// Observation table for feedforward nets, `seq_id,step,...` table for recurrent ones.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON map of feature domains, `{"name": [low, high]}`.
    #[arg(long)]
    pub domains: Option<PathBuf>,
    /// Output step the attribution is read at (recurrent nets; default: last step all sequences share).
    #[arg(long = "out-step")]
    pub out_step: Option<usize>,
    /// Output neuron.
    #[arg(long = "output-index", default_value_t = 0)]
    pub output_index: usize,
    /// Grid size.
    #[arg(long, value_parser = grid_size)]
    pub num: usize,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Step for directional differences.
    #[arg(long, default_value_t = DEFAULT_DSD_EPS, value_parser = positive)]
    pub eps: f64,
}

/// One feature and the range it is swept over.
#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long)]
    pub feature: String,
    /// Step the intervention happens at (recurrent nets; default: the output step).
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long, requires = "high", allow_negative_numbers = true)]
    pub low: Option<f64>,
    #[arg(long, requires = "low", allow_negative_numbers = true)]
    pub high: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// Sweep CSV to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressorArgs {
    /// Highest polynomial order considered.
    #[arg(long = "max-order", default_value_t = DEFAULT_MAX_ORDER)]
    pub max_order: usize,
    /// Fixed prior precision (default: weak prior scaled to the targets).
    #[arg(long = "prior-precision", allow_negative_numbers = true)]
    pub prior_precision: Option<f64>,
    /// Fixed noise precision (default: maximize the evidence).
    #[arg(long = "noise-precision", allow_negative_numbers = true)]
    pub noise_precision: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub feature: FeatureArgs,
    #[command(flatten)]
    pub regressor: RegressorArgs,
    /// Values to report ACE at (default: the sweep grid).
    #[arg(long = "alpha-at", num_args = 1.., allow_negative_numbers = true)]
    pub alpha_at: Vec<f64>,
    /// ACE CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Regressor document to write (default: the output path with extension `regressor.json`).
    #[arg(long)]
    pub regressor_output: Option<PathBuf>,
    /// Also write the underlying sweep CSV here.
    #[arg(long)]
    pub sweep_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub regressor: RegressorArgs,
    /// Row index (feedforward) or sequence id or index (recurrent) to explain.
    #[arg(long)]
    pub instance: String,
    /// Read ACE off the raw sweep instead of a fitted regressor.
    #[arg(long)]
    pub raw: bool,
    /// Clamp negative attributions to zero.
    #[arg(long)]
    pub threshold: bool,
    /// Saliency CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Graymap (PGM) rendering of the map.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    /// Recurrent network document.
    #[arg(long)]
    pub net: PathBuf,
    /// `seq_id,step,...` table.
    #[arg(long)]
    pub data: PathBuf,
    /// Output step whose lookback is measured.
    #[arg(long)]
    pub step: usize,
    /// Restrict the dependence measure to one output neuron.
    #[arg(long = "output-index")]
    pub output_index: Option<usize>,
    /// Dependence below this counts as none.
    #[arg(long, default_value_t = DEFAULT_TAU_TOL)]
    pub tol: f64,
    /// Also write the value here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Softmax classifier on a labelled table.
    Mlp(TrainMlpArgs),
    /// Binary GRU classifier on labelled sequences.
    Gru(TrainGruArgs),
}

#[derive(Debug, Args)]
pub struct TrainMlpArgs {
    /// Table including the label column.
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding class indices 0, 1, ...
    #[arg(long = "label-column")]
    pub label_column: String,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value = "relu", value_parser = activation)]
    pub activation: Activation,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Min-max normalize the features to [0, 1] and write the normalized table here.
    #[arg(long)]
    pub normalize: Option<PathBuf>,
    /// Network document to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-epoch loss and accuracy CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainGruArgs {
    /// `seq_id,step,...` table.
    #[arg(long)]
    pub data: PathBuf,
    /// `seq_id,label` table with labels 0 or 1.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub hidden: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Network document to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-epoch loss and accuracy CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of sequences.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Sequence table to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Label table to write.
    #[arg(long)]
    pub labels: PathBuf,
}

fn grid_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if n < 2 {
        return Err("a grid needs at least 2 points".into());
    }
    Ok(n)
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn activation(s: &str) -> Result<Activation, String> {
    s.parse()
}
