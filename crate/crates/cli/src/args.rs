use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use taep_core::experiment::{Metric, SweepParam};
use taep_core::scoring::Mode;

#[derive(Debug, Parser)]
#[command(name = "taep", version, about = "Transfer-aware embedding projection for multi-label zero-shot learning")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        match self.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on seen labels.
    Train(TrainArgs),
    /// Rank candidate labels for each instance.
    Predict(PredictArgs),
    /// Score a model (or a predictions file) against ground truth.
    Evaluate(EvaluateArgs),
    /// Grid-search β, γ, λ on a split of the seen labels, then retrain.
    Tune(TuneArgs),
    /// Build an auxiliary label similarity matrix.
    SimBuild(SimBuildArgs),
    /// Write a synthetic zero-shot task.
    Synth(SynthArgs),
    /// Retrain with γ or λ scaled by 1, 0.1, 0.01, 0.001 and report test metrics.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Rank unseen labels only.
    Zeroshot,
    /// Rank seen and unseen labels together.
    Generalized,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Zeroshot => Mode::UnseenOnly,
            ModeArg::Generalized => Mode::AllLabels,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimSource {
    /// `child<TAB>parent` edges; similarity is 1 / (path length + 1).
    Hierarchy,
    /// Single and pairwise hit counts; similarity is the Dice coefficient.
    Counts,
}

/// Training inputs shared by train, tune and sweep.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Instance features, n×d matrix file.
    #[arg(long)]
    pub features: PathBuf,
    /// Seen-label indicators, n×Lˢ matrix file of 0/1.
    #[arg(long)]
    pub labels: PathBuf,
    /// Label word vectors, seen labels first.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// How many leading embedding lines are seen labels.
    #[arg(long)]
    pub seen_count: usize,
    /// Auxiliary label similarity over all labels (needed when λ > 0).
    #[arg(long)]
    pub aux_sim: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Projection rank.
    #[arg(long)]
    pub r: usize,
    /// Outer iterations (Ψ pass + U update).
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Relative dual-objective change that stops training.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-iteration trace as tab-separated values.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Zeroshot)]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model to score. Needs --features.
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub features: Option<PathBuf>,
    /// Score an existing predictions file instead of a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Ground truth: candidate columns only, or one column per label.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Zeroshot)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Selection metric: miap, micro_f1, macro_f1 or hamming.
    #[arg(long, default_value = "miap")]
    pub metric: Metric,
    /// Seed for the validation instance holdout.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// β candidates (default 1..10).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// γ candidates (default 0.01,0.1,1,10).
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// λ candidates (default 0.01,0.1,1,10 with --aux-sim, else 0).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Fraction of instances held out for validation.
    #[arg(long, default_value_t = 0.3)]
    pub holdout: f64,
    /// Score each grid point by its best validation iterate.
    #[arg(long)]
    pub keep_best_iterate: bool,
    /// Final model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Write every grid point's validation metrics as tab-separated values.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimBuildArgs {
    #[arg(long, value_enum)]
    pub source: SimSource,
    /// Hierarchy or counts file.
    #[arg(long)]
    pub input: PathBuf,
    /// Label names, one per line, in embedding order.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_test: usize,
    #[arg(long, default_value_t = 8)]
    pub seen: usize,
    #[arg(long, default_value_t = 4)]
    pub unseen: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 24)]
    pub d: usize,
    #[arg(long, default_value_t = 0.2)]
    pub label_density: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.9)]
    pub tightness: f64,
    #[arg(long, default_value_t = 0.0)]
    pub embedding_noise: f64,
    /// Noise amplitude of the written similarity matrix.
    #[arg(long, default_value_t = 0.1)]
    pub sim_noise: f64,
    /// Directory for the generated files (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub param: SweepParam,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub test_features: PathBuf,
    #[arg(long)]
    pub test_truth: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Zeroshot)]
    pub mode: ModeArg,
    /// Write the table here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG plot of MiAP against the scaling factor.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}
