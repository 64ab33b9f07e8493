use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "htcompress",
    version,
    about = "Heavy-tailed weight compression, sparsity and concentration bounds, and generalization-bound reports",
    after_help = "Any flag can also come from `--config FILE.json`, whose keys are long flag names.\n\
                  HTCOMPRESS_THREADS caps the worker threads used for parallel trials."
)]
pub struct Cli {
    /// Output format for the summary printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Maximum-likelihood tail exponent of a layer's magnitudes.
    Fit(FitArgs),
    /// Split a matrix at a threshold into bulk and spikes.
    Split(SplitArgs),
    /// Compress a network archive layer by layer.
    Compress(CompressArgs),
    /// Evaluate analytic bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Measure layer and interlayer cushions, contraction and smoothness.
    Cushions(CushionsArgs),
    /// Spectral norm and stable rank of a layer.
    StableRank(StableRankArgs),
    /// Tail exponent against stable rank across archives, with a two-line EM fit.
    Sweep(SweepArgs),
    /// Resilient-path bound over a grid of tail exponents and brackets.
    Contour(ContourArgs),
    /// Monte-Carlo checks of the bounds.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Train the Gaussian-blob toy network and write it with its data.
    TrainToy(TrainToyArgs),
    /// Accuracy before and after repeated compression (one table row).
    Experiment(ExperimentArgs),
    /// End-to-end generalization bound report.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixSource {
    /// Weight archive directory (manifest.json plus raw layer files).
    #[arg(long, conflicts_with = "csv", required_unless_present = "csv")]
    pub archive: Option<PathBuf>,
    /// Layer name inside the archive; the final layer when omitted.
    #[arg(long, requires = "archive")]
    pub layer: Option<String>,
    /// Headerless CSV matrix.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WminChoice {
    /// Standard deviation of the magnitudes.
    Stddev,
    /// The value given by --w-min.
    Fixed,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    #[arg(long, value_enum, default_value_t = WminChoice::Stddev)]
    pub w_min_rule: WminChoice,
    #[arg(long, required_if_eq("w_min_rule", "fixed"))]
    pub w_min: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitModeArg {
    SignedAbsolute,
    PositiveSupport,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = SplitModeArg::SignedAbsolute)]
    pub mode: SplitModeArg,
    /// Write the spikes as `row,col,value` CSV.
    #[arg(long)]
    pub spikes: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressModeArg {
    Theory,
    Stddev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceArg {
    Conservative,
    Paper,
}

#[derive(Debug, Args, Serialize)]
pub struct CompressionFlags {
    #[arg(long, value_enum, default_value_t = CompressModeArg::Theory)]
    pub mode: CompressModeArg,
    /// Layers to compress (1-based); all layers in theory mode and the final
    /// layer in stddev mode when omitted.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Threshold quantile of |W| (theory mode).
    #[arg(long, default_value_t = 0.95, conflicts_with = "tau")]
    pub tau_quantile: f64,
    /// Fixed threshold (theory mode); infeasible values are errors.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = VarianceArg::Conservative)]
    pub variance: VarianceArg,
    /// JSON compression config; overrides the flags above.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompressArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[command(flatten)]
    pub compression: CompressionFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the compressed archive.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Path for the JSON summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "bound")]
pub enum BoundsCommand {
    /// Chernoff bound and exact tail of the spike count.
    Sparsity(SparsityArgs),
    /// Variance budget, threshold feasibility and the concentration tail.
    Concentration(ConcentrationArgs),
    /// Expected squared spike contribution.
    Spiked(SpikedArgs),
    /// Resilient-path bound for one bracket.
    Resilient(ResilientArgs),
    /// Simple compression generalization bound.
    Generalization(GeneralizationArgs),
    /// Covering constant from measured cushions.
    Covering(CoveringArgs),
    /// Entropy integral.
    Dudley(DudleyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SparsityArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub k: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = VarianceArg::Conservative)]
    pub variance: VarianceArg,
    /// Deviation level for the tail bound.
    #[arg(long, requires = "uv_frobenius")]
    pub s: Option<f64>,
    #[arg(long)]
    pub uv_frobenius: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpikedArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub w_min: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ResilientArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long = "M")]
    pub big_m: u32,
    #[arg(long = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub i: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct GeneralizationArgs {
    /// Spike counts per layer.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<u64>,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub margin_loss: f64,
    #[arg(long, default_value_t = htcompress::bounds::DEFAULT_QUANTIZATION_LEVELS)]
    pub r: u64,
    #[arg(long, default_value_t = htcompress::bounds::DEFAULT_CONSTANT_C)]
    pub constant: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CoveringArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub mu: Vec<f64>,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub f_max: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DudleyArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CushionsArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Dataset CSV with a JSON sidecar of the same stem.
    #[arg(long)]
    pub data: PathBuf,
    /// Also estimate the interlayer smoothness with this relative noise.
    #[arg(long)]
    pub smoothness_noise: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub draws: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StableRankArgs {
    #[command(flatten)]
    pub source: MatrixSource,
    #[arg(long, default_value_t = htcompress::matrix::DEFAULT_POWER_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Archive directories to include.
    #[arg(long, value_delimiter = ',')]
    pub archives: Vec<PathBuf>,
    /// Tail exponents of planted symmetric Pareto layers to add.
    #[arg(long, value_delimiter = ',')]
    pub planted_alphas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub planted_seeds: u64,
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    #[arg(long, default_value_t = 100)]
    pub cols: usize,
    #[arg(long, value_enum, default_value_t = WminChoice::Stddev)]
    pub w_min_rule: WminChoice,
    #[arg(long, required_if_eq("w_min_rule", "fixed"))]
    pub w_min: Option<f64>,
    /// Number of regression lines in the mixture fit; 0 skips the fit.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV table path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ContourArgs {
    #[arg(long, default_value_t = 1.3)]
    pub c: f64,
    #[arg(long = "M", default_value_t = 5)]
    pub big_m: u32,
    #[arg(long = "N", default_value_t = 64)]
    pub big_n: u64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 20)]
    pub alpha_steps: usize,
    /// Largest bracket index; brackets run from 1.
    #[arg(long)]
    pub max_bracket: Option<u32>,
    /// CSV grid path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "check")]
pub enum VerifyCommand {
    /// Gaussian substitution error on random bilinear forms.
    Concentration(VerifyConcentrationArgs),
    /// Spike counts against the Chernoff bound and the exact tail.
    Sparsity(VerifySparsityArgs),
    /// Monte-Carlo mean of the squared spike contribution.
    Spiked(VerifySpikedArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauModeArg {
    Balanced,
    MaxFeasible,
    Fixed,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyConcentrationArgs {
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_min: f64,
    #[arg(long, default_value_t = 200)]
    pub rows: usize,
    #[arg(long, default_value_t = 200)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = TauModeArg::Balanced)]
    pub tau_mode: TauModeArg,
    #[arg(long, required_if_eq("tau_mode", "fixed"))]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = VarianceArg::Conservative)]
    pub variance: VarianceArg,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySparsityArgs {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_min: f64,
    #[arg(long)]
    pub tau: f64,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub k: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySpikedArgs {
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainToyArgs {
    /// Output directory for network/, train.csv, test.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [32usize, 32])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub train_samples: usize,
    #[arg(long, default_value_t = 2000)]
    pub test_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 1.0)]
    pub center_scale: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub step_size: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Evaluation dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "model")]
    pub name: String,
    #[arg(long, default_value = "held-out")]
    pub dataset_name: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Table CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Training dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub compression: CompressionFlags,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0])]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = htcompress::bounds::DEFAULT_QUANTIZATION_LEVELS)]
    pub r: u64,
    #[arg(long, default_value_t = htcompress::bounds::DEFAULT_CONSTANT_C)]
    pub constant: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dudley_upper: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
