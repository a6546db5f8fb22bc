use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use neurotext::interpret::SaliencyReduction;
use neurotext::math::Activation;
use neurotext::recurrent::CellKind;
use neurotext::seq2seq::{AttentionMode, ScoreKind};
use neurotext::text::Truncation;
use neurotext::train::{InitScheme, OptimizerKind};
use serde::de::{DeserializeOwned, IntoDeserializer};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "neurotext", version, about = "Train, decode and inspect hand-derived neural text models")]
pub struct Cli {
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write checkpoint, vocabulary, log and resolved config.
    Train(TrainArgs),
    /// Score a trained model on a corpus.
    Eval(EvalArgs),
    /// Sample text from a language model.
    Generate(GenerateArgs),
    /// Decode source sentences with a seq2seq model.
    Translate(TranslateArgs),
    /// Saliency, predictive regions, embedding projections and attention maps.
    Inspect(InspectArgs),
    /// Compare analytic and finite-difference gradients on a small instance.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic corpus with known structure.
    Synth(SynthArgs),
}

/// Commands whose flags can be backed by a TOML file.
pub trait Configurable {
    fn config_path(&self) -> Option<&PathBuf>;
    fn set_config_path(&mut self, path: Option<PathBuf>);
}

macro_rules! configurable {
    ($($t:ty),*) => {$(
        impl Configurable for $t {
            fn config_path(&self) -> Option<&PathBuf> {
                self.config.as_ref()
            }
            fn set_config_path(&mut self, path: Option<PathBuf>) {
                self.config = path;
            }
        }
    )*};
}

configurable!(TrainArgs, EvalArgs, GenerateArgs, TranslateArgs, InspectArgs, GradcheckArgs, SynthArgs);

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Cnn,
    RnnLm,
    LstmLm,
    GruLm,
    Seq2seq,
    Han,
}

impl ModelKind {
    pub fn lm_cell(self) -> Option<CellKind> {
        match self {
            ModelKind::RnnLm => Some(CellKind::Rnn),
            ModelKind::LstmLm => Some(CellKind::Lstm),
            ModelKind::GruLm => Some(CellKind::Gru),
            _ => None,
        }
    }
}

pub fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(s.into_deserializer()).map_err(|e: serde::de::value::Error| e.to_string())
}

/// `glorot-uniform` (alias `glorot`) or `uniform:<scale>`.
pub fn parse_init(s: &str) -> Result<InitScheme, String> {
    match s {
        "glorot" | "glorot-uniform" => Ok(InitScheme::GlorotUniform),
        _ => match s.strip_prefix("uniform:").map(str::parse::<f64>) {
            Some(Ok(scale)) if scale > 0.0 && scale.is_finite() => Ok(InitScheme::Uniform(scale)),
            _ => Err(format!("expected `glorot-uniform` or `uniform:<scale>`, got `{s}`")),
        },
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    /// TOML file supplying any of these flags; explicit flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Training corpus: `label<TAB>text` (cnn, han), `source<TAB>target`
    /// (seq2seq) or one sequence per line (language models).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub val_corpus: Option<PathBuf>,
    /// Held-out share of the corpus when no validation corpus is given.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// word2vec text vectors for the CNN embedding table.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    #[arg(long, default_value = "adam")]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, default_value = "glorot-uniform", value_parser = parse_init)]
    pub init: InitScheme,

    /// Embedding width.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub regions: Vec<usize>,
    /// Filters per region size.
    #[arg(long, default_value_t = 100)]
    pub nf: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Fixed document length.
    #[arg(long, default_value_t = 100)]
    pub s: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value = "relu", value_parser = parse_serde::<Activation>)]
    pub activation: Activation,
    #[arg(long)]
    pub bias_after_activation: bool,
    #[arg(long)]
    pub static_embeddings: bool,
    /// Two-neuron softmax head on binary corpora instead of one sigmoid neuron.
    #[arg(long)]
    pub softmax: bool,
    #[arg(long, default_value = "head", value_parser = parse_serde::<Truncation>)]
    pub truncation: Truncation,

    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub char_level: bool,
    #[arg(long)]
    pub one_hot: bool,
    /// Truncated-BPTT chunk length.
    #[arg(long)]
    pub bptt: Option<usize>,
    #[arg(long)]
    pub no_head_bias: bool,

    #[arg(long, default_value = "global")]
    pub attention: AttentionMode,
    #[arg(long, default_value = "dot")]
    pub score: ScoreKind,
    /// Local attention half-width D.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long)]
    pub no_gaussian: bool,
    #[arg(long)]
    pub bidirectional: bool,
    #[arg(long)]
    pub attention_dim: Option<usize>,
    #[arg(long)]
    pub decoder_hidden: Option<usize>,
    #[arg(long)]
    pub out_bias: bool,

    #[arg(long, default_value_t = 25)]
    pub word_hidden: usize,
    #[arg(long, default_value_t = 25)]
    pub sentence_hidden: usize,
    #[arg(long)]
    pub no_attention_bias: bool,
}

/// Locations of a trained model; `run` fills in whatever is not given.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ModelPaths {
    /// Output directory of a `train` run.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub src_vocab: Option<PathBuf>,
    #[arg(long)]
    pub tgt_vocab: Option<PathBuf>,
    /// Character tokens; taken from the run's config when `--run` is given.
    #[arg(long)]
    pub char_level: bool,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub paths: ModelPaths,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory for metrics.csv and the resolved config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// HAN only: per-word attention CSV.
    #[arg(long)]
    pub dump_han_attention: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub eval_workers: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub paths: ModelPaths,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub max_steps: usize,
    /// Softmax temperature; below 1e-6 sampling becomes argmax.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// File to write the samples to, one per line.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TranslateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub paths: ModelPaths,
    /// One source sentence per line; anything after a tab is ignored.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    #[arg(long, conflicts_with = "beam")]
    pub greedy: bool,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    /// Rank beam hypotheses by log p / len^α.
    #[arg(long, default_value_t = 0.0)]
    pub length_penalty: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// CSV of alignment weights (step, source_position, weight), plus an SVG heatmap.
    #[arg(long)]
    pub dump_attention: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InspectKind {
    Saliency,
    Regions,
    Embed,
    Attention,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct InspectArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(value_enum)]
    pub kind: InspectKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub paths: ModelPaths,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "inspect")]
    pub out: PathBuf,
    /// Only the first N documents.
    #[arg(long)]
    pub docs: Option<usize>,
    /// Regions kept per document.
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long, default_value = "l2")]
    pub reduction: SaliencyReduction,
    /// Per-document SVGs are written for at most this many documents.
    #[arg(long, default_value_t = 20)]
    pub max_plots: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value = "global")]
    pub attention: AttentionMode,
    #[arg(long, default_value = "dot")]
    pub score: ScoreKind,
    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    /// Filler words plus one planted class token.
    Sentiment,
    /// Source/target pairs with target = source.
    Copy,
    /// Two sentences, only one carrying the class token.
    TwoSentence,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(value_enum)]
    pub task: SynthTask,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Filler words (sentiment, two-sentence) or symbols (copy).
    #[arg(long, default_value_t = 40)]
    pub vocab: usize,
    #[arg(long, default_value_t = 8)]
    pub min_len: usize,
    /// Longest document, sequence or sentence.
    #[arg(long, default_value_t = 16)]
    pub max_len: usize,
}
