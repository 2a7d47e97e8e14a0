use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tsdshap",
    version,
    about = "Shapley-based training data valuation and selection on a linear proxy classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit PCA on representations and write the reduced train/dev matrices.
    Pca(PcaArgs),
    /// Estimate per-instance values with multi-chain subset sampling.
    Value(ValueArgs),
    /// Exact Shapley values by subset enumeration (at most 20 training rows).
    Exact(ExactArgs),
    /// Leave-one-out, KNN-Shapley or random baselines.
    Baseline(BaselineArgs),
    /// Build the low-value removal curve and write the kept training indices.
    Select(SelectArgs),
    /// Correlate sweep parameters with downstream performance.
    Correlate(CorrelateArgs),
    /// Write a synthetic two-Gaussian dataset with flipped training labels.
    GenBenchmark(GenBenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PcaFit {
    /// Fit on train and dev rows together.
    All,
    /// Fit on train rows only.
    Train,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    #[arg(long, value_name = "PATH")]
    pub train_embeddings: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dev_embeddings: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, value_name = "PATH")]
    pub train_labels: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dev_labels: PathBuf,
    /// Reduce the inputs to this many principal components before use.
    #[arg(long, value_name = "N")]
    pub pca_dims: Option<usize>,
    #[arg(long, value_enum, default_value_t = PcaFit::All)]
    pub pca_fit: PcaFit,
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    /// L2 regularisation strength of the proxy SVM.
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub reg_c: f64,
    #[arg(long, value_name = "N", default_value_t = 100)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct ThreadArgs {
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, value_name = "N", env = "TSDSHAP_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, value_name = "N", default_value_t = 32)]
    pub pca_dims: usize,
    #[arg(long, value_enum, default_value_t = PcaFit::All)]
    pub pca_fit: PcaFit,
    /// Output directory for train.tsds, dev.tsds and pca.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Sst2,
    Qqp,
    Rte,
}

impl Preset {
    /// (subset size, chains) used for the corresponding GLUE training set.
    pub fn sampling(self) -> (usize, usize) {
        match self {
            Preset::Sst2 => (6700, 25),
            Preset::Qqp => (7280, 10),
            Preset::Rte => (374, 25),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sst2 => "sst2",
            Preset::Qqp => "qqp",
            Preset::Rte => "rte",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    /// Divide contribution sums by the iteration count.
    Iterations,
    /// Divide by the number of iterations that sampled the instance.
    Inclusions,
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Upper bound on sampled subset sizes.
    #[arg(long, value_name = "N", conflicts_with = "subset_size_pct")]
    pub subset_size: Option<usize>,
    /// Subset size bound as a percentage of the training set.
    #[arg(long, value_name = "F")]
    pub subset_size_pct: Option<f64>,
    #[arg(long, value_name = "N")]
    pub chains: Option<usize>,
    #[arg(long, value_name = "N", default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Install subset size and chain count for a GLUE task.
    #[arg(long, value_enum, value_name = "NAME")]
    pub preset: Option<Preset>,
    #[arg(long, value_enum, default_value_t = Normalize::Iterations)]
    pub normalize: Normalize,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Loo,
    Knn,
    Random,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub knn_k: usize,
    /// Random baseline only: remove this many instances and write kept indices
    /// instead of a values file.
    #[arg(long, value_name = "N")]
    pub remove: Option<usize>,
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Allow leave-one-out above 50,000 training rows.
    #[arg(long)]
    pub confirm_large: bool,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Values JSON written by `value`, `exact` or `baseline`.
    #[arg(long, value_name = "PATH")]
    pub values: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    /// Instances removed between curve points [default: max(1, n/100)].
    #[arg(long, value_name = "N")]
    pub step: Option<usize>,
    /// Kept-indices output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Removal-curve CSV [default: <out>.curve.csv].
    #[arg(long, value_name = "PATH")]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    Chains,
    SubsetSize,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Sweep CSV with header `subset_size_pct,chains,performance,trial`.
    #[arg(long, value_name = "PATH")]
    pub records: PathBuf,
    #[arg(long, value_enum)]
    pub vary: Vary,
    /// Row label in the printed table.
    #[arg(long, default_value = "performance")]
    pub label: String,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenBenchmarkArgs {
    /// Training rows.
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Dev rows [default: n/4].
    #[arg(long, value_name = "N")]
    pub dev_n: Option<usize>,
    #[arg(long, value_name = "N", default_value_t = 32)]
    pub dim: usize,
    #[arg(long, value_name = "F", default_value_t = 0.1)]
    pub flip: f64,
    /// Distance between class means in standard deviations.
    #[arg(long, value_name = "F", default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}
