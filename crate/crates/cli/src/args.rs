use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "xmodal", version, about = "Joint audio/image embeddings: train, project, retrieve, classify")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Global {
    /// Seed for every random choice of the run
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving outputs and run.json
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true, env = "XMODAL_THREADS")]
    pub threads: Option<usize>,
    /// JSON object of flag values; flags given on the command line win
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate the synthetic paired dataset and its toy ontology
    Synth(SynthArgs),
    /// Check store directories (and optionally their labels against an ontology)
    ValidateStore(ValidateArgs),
    /// Train the two translation towers on clip-paired stores
    TrainTranslation(TrainArgs),
    /// Fit a PCA projection on one store
    FitPca(FitPcaArgs),
    /// Project a store with a translation or PCA checkpoint
    Project(ProjectArgs),
    /// Cross-modal retrieval NDCG@k, with a random-ranking baseline
    RetrieveEval(RetrieveArgs),
    /// Train and score every audio x image model combination
    ComboStudy(ComboArgs),
    /// Fit a random forest on one or more projected stores
    TrainClassifier(TrainClassifierArgs),
    /// Per-class F1 and confusion matrix of a fitted forest
    EvalClassifier(EvalClassifierArgs),
    /// Macro-F1 as target-modality samples are mixed into training
    MixCurve(MixCurveArgs),
    /// Cosine distances between (modality, class) centroids
    ClusterDist(ClusterArgs),
    /// Per-class sample counts of a store
    ClassHist(ClassHistArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 18)]
    pub n_classes: usize,
    #[arg(long, default_value_t = 32)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 1024)]
    pub audio_dim: usize,
    #[arg(long, default_value_t = 2048)]
    pub image_dim: usize,
    #[arg(long, default_value = "yamnet")]
    pub audio_model: String,
    #[arg(long, default_value = "resnet50")]
    pub image_model: String,
    #[arg(long, default_value_t = 0.1)]
    pub latent_noise: f64,
    #[arg(long, default_value_t = 0.05)]
    pub audio_noise: f64,
    #[arg(long, default_value_t = 0.05)]
    pub image_noise: f64,
    #[arg(long, default_value_t = 111)]
    pub translation_per_class: usize,
    #[arg(long, default_value_t = 28)]
    pub cross_modal_per_class: usize,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    /// Per-class count multipliers, comma separated
    #[arg(long, value_delimiter = ',')]
    pub class_imbalance: Option<Vec<f64>>,
    /// Extra audio models as name:dim:noise, comma separated
    #[arg(long, value_delimiter = ',')]
    pub extra_audio: Vec<String>,
    /// Extra image models as name:dim:noise, comma separated
    #[arg(long, value_delimiter = ',')]
    pub extra_image: Vec<String>,
    /// Image/audio map overlap of the shared-space baseline model
    #[arg(long, default_value_t = 0.11)]
    pub shared_alignment: f64,
    #[arg(long, default_value_t = 512)]
    pub shared_dim: usize,
    /// Skip the shared-space baseline model
    #[arg(long)]
    pub no_shared: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub stores: Vec<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Directory holding `audio/` and `image/` stores
    #[arg(long, required_unless_present_all = ["audio", "image"])]
    pub pairs: Option<PathBuf>,
    /// Audio store, instead of --pairs
    #[arg(long, requires = "image")]
    pub audio: Option<PathBuf>,
    #[arg(long, requires = "audio")]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
    /// Hinge margin on the cosine distance of negatives
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// 0 saves the untrained towers
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitPcaArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub k: usize,
    /// Checkpoint file name inside the output directory
    #[arg(long, default_value = "pca.xmpc")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Translation checkpoint
    #[arg(long, conflicts_with = "pca", required_unless_present = "pca")]
    pub translation: Option<PathBuf>,
    /// PCA checkpoint
    #[arg(long)]
    pub pca: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RelevanceArgs {
    #[arg(long)]
    pub ontology: PathBuf,
    #[arg(long, default_value_t = 21)]
    pub max_distance: u32,
    /// Label ids dropped from relevance; defaults to the generic top labels
    #[arg(long, value_delimiter = ',')]
    pub exclude_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Translation checkpoint applied before retrieval
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub relevance: RelevanceArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ComboArgs {
    /// Dataset root laid out like `xmodal synth` output
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 32)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    /// Features tried per split; default ceil(sqrt(dim))
    #[arg(long)]
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainClassifierArgs {
    #[arg(long = "train", required = true)]
    pub train: Vec<PathBuf>,
    #[arg(long)]
    pub ontology: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalClassifierArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityArg {
    Audio,
    Image,
}

impl From<ModalityArg> for xmodal::Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Audio => xmodal::Modality::Audio,
            ModalityArg::Image => xmodal::Modality::Image,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MixCurveArgs {
    /// Dataset root laid out like `xmodal synth` output
    #[arg(long)]
    pub data: PathBuf,
    /// Translation checkpoint
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModalityArg::Audio)]
    pub source: ModalityArg,
    /// Target sample counts; default spreads --grid-points from 0 to all
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 8)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortArg {
    Modality,
    Class,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
    /// Translation checkpoint applied first
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SortArg::Class)]
    pub sort: SortArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClassHistArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
}
