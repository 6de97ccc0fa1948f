use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leaflife_core::model::Backbone;

#[derive(Debug, Parser)]
#[command(name = "leaflife", version, about = "Grape leaf disease classification toolkit")]
pub struct Cli {
    /// Debug-level logging.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inventory a dataset directory (one sub-folder per class).
    Scan(ScanArgs),
    /// Stratified train/val/test split.
    Split(ScanArgs),
    /// Train a classifier.
    Train(TrainArgs),
    /// Evaluate a saved model on the test subset.
    Eval(EvalArgs),
    /// Adversarial training over a list of FGSM budgets.
    Sweep(SweepArgs),
    /// Heatmap for a single image.
    Explain(ExplainArgs),
    /// Serve a saved model over HTTP.
    Serve(ServeArgs),
    /// Comparison table from evaluation reports.
    Report(ReportArgs),
}

/// Options every command shares. Flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment file (TOML).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset_root: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Outputs go to `<output-dir>/<run-id>/`; defaults to command and time.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Seed for both the split and training.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub backbone: Option<Backbone>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train only the classification head.
    #[arg(long)]
    pub freeze_backbone: bool,
    #[arg(long)]
    pub width_multiplier: Option<f64>,
    /// Safetensors file with backbone weights.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub train: TrainOverrides,
    /// Reuse a saved split instead of recomputing it.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Name used in the report; defaults to the model's backbone.
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Comma-separated budgets, e.g. `0,0.1,0.2`.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub adv_fraction: Option<f64>,
    /// Runs trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Keep every model and history under `eps_<value>/`.
    #[arg(long)]
    pub save_models: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    GradCam,
    Occlusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Score {
    Logit,
    Probability,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::GradCam)]
    pub method: Method,
    /// Feature layer for Grad-CAM; defaults to the last one.
    #[arg(long)]
    pub layer: Option<String>,
    /// Class index to explain; defaults to the prediction.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, value_enum, default_value_t = Score::Logit)]
    pub score: Score,
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 32)]
    pub patch: usize,
    #[arg(long, default_value_t = 16)]
    pub stride: usize,
    /// Occlusion fill in [0, 1]; defaults to the training mean pixel.
    #[arg(long)]
    pub fill: Option<f32>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "LEAFLIFE_MODEL_DIR")]
    pub model: PathBuf,
    #[arg(long, env = "LEAFLIFE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub bind: std::net::IpAddr,
    #[arg(long, env = "LEAFLIFE_MAX_UPLOAD_MB", default_value_t = 10.0)]
    pub max_upload_mb: f64,
    /// Allowed cross-origin callers; `*` allows any.
    #[arg(long = "cors-origin", env = "LEAFLIFE_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// `report.json` files written by `eval`.
    #[arg(long = "report", required = true)]
    pub reports: Vec<PathBuf>,
    /// CSV `author,method,accuracy_percent`; defaults to the bundled list.
    #[arg(long)]
    pub literature: Option<PathBuf>,
}
