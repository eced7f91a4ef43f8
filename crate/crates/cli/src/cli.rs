use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distmap::cdfcodec::GridShape;
use distmap::latentlab::{
    CLASS_MAP_RESOLUTION, DEFAULT_ENTROPY_BINS, DEFAULT_MIN_COUNT, DEFAULT_P_MIN, DEFAULT_W_STAR,
    DENSITY_RESOLUTION,
};
use distmap::neuralcore::OptimizerKind;

#[derive(Debug, Parser)]
#[command(name = "distmap", version, about = "Map univariate distributions onto a learned latent coordinate system")]
pub struct Cli {
    /// Master seed for generation, training seed otherwise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid shape as BINSxLEVELS.
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<GridShape>,
    /// Directory for every artifact and the run ledger.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_grid(s: &str) -> Result<GridShape, String> {
    s.parse().map_err(|e: distmap::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the labeled DOE, its binary cache and a manifest.
    Generate(GenerateArgs),
    /// Train a model on a dataset cache.
    Train(TrainArgs),
    /// Encode a dataset with a trained beta-VAE and export the latent analyses.
    Map(MapArgs),
    /// Emit metadata records (JSONL) for the numeric columns of a CSV file.
    Describe(DescribeArgs),
    /// Compare analytic gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Confusion matrix of a classifier on its held-out split.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON plan with `master_seed`, `per_family_count` and `grid`.
    #[arg(long, conflicts_with = "per_family")]
    pub spec: Option<PathBuf>,
    /// Variables per family when no spec file is given.
    #[arg(long)]
    pub per_family: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Classifier,
    Bvae,
    LatentClassifier,
}

impl ModelKind {
    pub fn stem(self) -> &'static str {
        match self {
            ModelKind::Classifier => "classifier",
            ModelKind::Bvae => "bvae",
            ModelKind::LatentClassifier => "latent_classifier",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub model: ModelKind,
    /// Dataset cache [default: <out-dir>/dataset.bin].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained beta-VAE for the latent classifier [default: <out-dir>/bvae.ckpt].
    #[arg(long)]
    pub vae: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: distmap::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// [default: <out-dir>/bvae.ckpt]
    #[arg(long)]
    pub vae: Option<PathBuf>,
    /// [default: <out-dir>/dataset.bin]
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// [default: <out-dir>/latent_classifier.ckpt]
    #[arg(long)]
    pub latent_classifier: Option<PathBuf>,
    /// Class-map cells per axis.
    #[arg(long, default_value_t = CLASS_MAP_RESOLUTION)]
    pub resolution: usize,
    /// Density and WOE cells per axis.
    #[arg(long, default_value_t = DENSITY_RESOLUTION)]
    pub density_resolution: usize,
    /// Decoded lattice points per axis.
    #[arg(long, default_value_t = 50)]
    pub generate_resolution: usize,
    #[arg(long, default_value_t = DEFAULT_W_STAR)]
    pub w_star: f64,
    #[arg(long, default_value_t = DEFAULT_P_MIN)]
    pub p_min: f64,
    #[arg(long, default_value_t = DEFAULT_ENTROPY_BINS)]
    pub entropy_bins: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    /// Wide CSV with a header row; each numeric column is one variable.
    #[arg(long)]
    pub csv: PathBuf,
    /// [default: <out-dir>/classifier.ckpt]
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// [default: <out-dir>/bvae.ckpt]
    #[arg(long)]
    pub vae: Option<PathBuf>,
    /// Segmentation written by `map` [default: <out-dir>/map/segmentation.json].
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    pub model: ModelKind,
    /// Check a trained model instead of a fresh initialization.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Source of the check batch [default: <out-dir>/dataset.bin].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Latent width of a fresh latent classifier or beta-VAE.
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// [default: <out-dir>/classifier.ckpt]
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// [default: <out-dir>/dataset.bin]
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Encoder for a latent classifier [default: <out-dir>/bvae.ckpt].
    #[arg(long)]
    pub vae: Option<PathBuf>,
}
