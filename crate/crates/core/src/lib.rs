//! Fine-tune word embeddings against similarity-ranking labels fused from
//! multiple embeddings and lexicons.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. **Label generation** ([`labels`]) — every source embedding proposes
//!    top-N neighbor lists; per-neighbor credits (`cosine / max cosine`)
//!    are summed across sources, low-consensus pairs are dropped, and the
//!    survivors become per-word ranked label lists.
//! 2. **Fine-tuning** ([`train`]) — ranking SGD nudges each word toward
//!    mis-ranked labeled neighbors and away from unlabeled words whose
//!    cosine exceeds a random-similarity threshold, with every step
//!    bounded by normalizing the mean contribution.
//! 3. **Evaluation** ([`eval`]) — Spearman similarity correlation, offset
//!    analogies, and sentence completion, all with out-of-vocabulary
//!    skip accounting.
//!
//! [`embedding`] holds the vector-file formats and vocabulary plumbing and
//! [`neighbors`] the exact cosine ranking primitives everything else is
//! built on. All similarity math runs in `f64` through one sequential dot
//! kernel, so results are reproducible bit-for-bit across runs and thread
//! counts.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod labels;
pub mod neighbors;
pub mod train;

pub use embedding::{
    detect_format, load_embedding, save_embedding, Embedding, TextFormat, Vocabulary,
};
pub use error::{Error, Result};
pub use eval::{
    eval_analogy, eval_completion, eval_similarity, solve_analogy, spearman, AnalogyDataset,
    CompletionDataset, EvalReport, SimilarityDataset,
};
pub use labels::{
    accumulate, default_min_support, finalize, inject_lexicon, LexiconPairs, RankingLabelSet,
};
pub use neighbors::{cosine, random_threshold, top_k, NeighborList, RankTable};
pub use train::{
    compile_labels, epsilon_preset, finetune, should_stop, StopMode, StopReason, SweepMode,
    ThresholdSpec, TrainConfig, TrainState, UpdateRule, WordOrder, EPSILON_PRESETS,
};
