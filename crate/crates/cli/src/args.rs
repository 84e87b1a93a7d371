//! Command-line argument definitions.
//!
//! Tunable flags are `Option`s so the resolution order stays visible in
//! one place (commands wire them through [`crate::config`]): explicit flag
//! first, then the config file, then the built-in default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ranktune::TextFormat;

#[derive(Debug, Parser)]
#[command(
    name = "ranktune",
    version,
    about = "Fine-tune word embeddings with similarity-ranking labels fused from multiple sources"
)]
pub struct Cli {
    /// Emit machine-readable JSON instead of text output.
    #[arg(long, global = true)]
    pub json: bool,

    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections (0 = automatic).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse neighbor rankings from several embeddings (and optionally a
    /// lexicon) into a ranking-label file.
    GenerateLabels(GenerateArgs),
    /// Fine-tune an embedding against a ranking-label file.
    Finetune(FinetuneArgs),
    /// Score an embedding (or a before/after pair) on benchmark datasets.
    Evaluate(EvaluateArgs),
    /// Print a word's nearest neighbors.
    Neighbors(NeighborsArgs),
    /// Print the random-similarity threshold for a dimensionality.
    Threshold(ThresholdArgs),
}

impl Command {
    /// Name used for config-file sections and manifests.
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenerateLabels(_) => "generate-labels",
            Command::Finetune(_) => "finetune",
            Command::Evaluate(_) => "evaluate",
            Command::Neighbors(_) => "neighbors",
            Command::Threshold(_) => "threshold",
        }
    }
}

/// Text format names accepted by `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// `word v1 v2 …` lines with no header.
    GloveText,
    /// `count dim` header followed by `word v1 v2 …` lines.
    Word2vecText,
}

impl From<FormatArg> for TextFormat {
    fn from(f: FormatArg) -> TextFormat {
        match f {
            FormatArg::GloveText => TextFormat::GloveText,
            FormatArg::Word2vecText => TextFormat::Word2vecText,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopModeArg {
    /// Stop when (J(i) − J(i+1)) / J(0) ≤ ε.
    Initial,
    /// Stop when (J(i) − J(i+1)) / J(i) ≤ ε.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpdateRuleArg {
    /// Cosine-weighted contributions with a normalized mean step.
    InverseError,
    /// Error-proportional contributions applied without normalization.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    /// Visit words in ascending row order.
    Ascending,
    /// Visit words in a seeded random order, reshuffled each epoch.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    /// Updates see earlier updates from the same epoch.
    InPlace,
    /// Updates are computed against the epoch-start matrix.
    Snapshot,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Source embedding; repeat the flag for each additional source.
    #[arg(long = "embedding", required = true, value_name = "PATH")]
    pub embeddings: Vec<PathBuf>,

    /// Optional `word1\tword2` pair file treated as one extra source.
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,

    /// Neighbors each source proposes per word [default: 200].
    #[arg(long, value_name = "N")]
    pub top_n: Option<usize>,

    /// Drop pairs selected by this many sources or fewer
    /// [default: 2 with ≥3 sources, otherwise 0].
    #[arg(long, value_name = "M")]
    pub min_support: Option<u32>,

    /// Maximum labeled neighbors kept per word [default: 200].
    #[arg(long, value_name = "K")]
    pub cap: Option<usize>,

    /// Output label file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Embedding text format [default: inferred per file].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Lowercase tokens, keeping the first of colliding rows.
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Embedding to fine-tune.
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,

    /// Ranking-label file from generate-labels.
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,

    /// Learning rate σ [default: 0.1].
    #[arg(long, value_name = "σ")]
    pub lr: Option<f64>,

    /// Stopping tolerance ε (alternative to --preset).
    #[arg(long, value_name = "ε")]
    pub epsilon: Option<f64>,

    /// Named ε preset: senna50, skip50, hlbl50, glove300, rnnlm640,
    /// dep1000 (alternative to --epsilon).
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,

    /// Stopping-criterion denominator [default: initial].
    #[arg(long, value_enum)]
    pub stop_mode: Option<StopModeArg>,

    /// Epoch budget [default: 100].
    #[arg(long, value_name = "M")]
    pub max_epochs: Option<usize>,

    /// Negative-sampling threshold: `auto` or a number [default: auto].
    #[arg(long, value_name = "auto|VALUE")]
    pub threshold: Option<String>,

    /// Rows sampled by the automatic threshold
    /// [default: min(5000, vocabulary size)].
    #[arg(long, value_name = "S")]
    pub sample: Option<usize>,

    /// Seed for the automatic threshold and shuffled order [default: 0].
    #[arg(long, value_name = "R")]
    pub seed: Option<u64>,

    /// Use at most this many labeled neighbors per word
    /// [default: unlimited].
    #[arg(long, value_name = "K")]
    pub rank_cap: Option<usize>,

    /// Update rule [default: inverse-error].
    #[arg(long, value_enum)]
    pub update_rule: Option<UpdateRuleArg>,

    /// Word visitation order [default: ascending].
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,

    /// Epoch sweep mode [default: in-place].
    #[arg(long, value_enum)]
    pub sweep: Option<SweepArg>,

    /// Output embedding file (same text format as the input).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Optional loss history CSV (epoch,J_rank,J_simi,seconds).
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,

    /// Embedding text format [default: inferred].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Lowercase tokens, keeping the first of colliding rows.
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Embedding to score (exclusive with --before/--after).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["before", "after"])]
    pub embedding: Option<PathBuf>,

    /// Baseline embedding for a paired report.
    #[arg(long, value_name = "PATH", requires = "after")]
    pub before: Option<PathBuf>,

    /// Fine-tuned embedding for a paired report.
    #[arg(long, value_name = "PATH", requires = "before")]
    pub after: Option<PathBuf>,

    /// Word-pair similarity dataset (`word1\tword2\tscore`).
    #[arg(long, value_name = "PATH")]
    pub similarity: Option<PathBuf>,

    /// Analogy dataset (`a b c answer`, optional `: section` lines).
    #[arg(long, value_name = "PATH")]
    pub analogy: Option<PathBuf>,

    /// Sentence-completion dataset (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub completion: Option<PathBuf>,

    /// Embedding text format [default: inferred].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Lowercase embedding and dataset tokens.
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    /// Embedding to query.
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,

    /// Query word.
    #[arg(long, value_name = "WORD")]
    pub word: String,

    /// Number of neighbors [default: 10].
    #[arg(long, value_name = "N")]
    pub k: Option<usize>,

    /// Embedding text format [default: inferred].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Lowercase tokens before querying.
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Vector dimensionality.
    #[arg(long, value_name = "D")]
    pub dim: usize,

    /// Random rows to sample [default: 5000].
    #[arg(long, value_name = "S")]
    pub sample: Option<usize>,

    /// Random seed [default: 0].
    #[arg(long, value_name = "R")]
    pub seed: Option<u64>,
}
