//! Ranking fine-tuning: per-word inverse-error-weighted updates, epoch
//! sweeps, loss tracking, and relative-improvement stopping.
//!
//! Each word's labeled neighbors carry desired ranks (their positions in
//! the label list). One update compares desired against actual ranks,
//! accumulates `sign · cos · row` per mis-ranked neighbor plus `−cos · row`
//! per unlabeled word whose cosine exceeds the random-similarity threshold,
//! then moves the word along the normalized mean of those contributions.
//! The normalization bounds every step, so large-error pairs cannot
//! dominate an epoch the way they do under plain error-proportional SGD
//! (available here as the `standard` update rule for comparison runs).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::labels::RankingLabelSet;
use crate::neighbors::{cosines_for, random_threshold, rank_from_cosines};

/// Which denominator the relative-improvement stop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    /// (J(i) − J(i+1)) / J(i) ≤ ε — improvement relative to the previous
    /// epoch.
    RelativeToPrevious,
    /// (J(i) − J(i+1)) / J(0) ≤ ε — improvement relative to the initial
    /// loss (the default; ε presets are calibrated for it).
    RelativeToInitial,
}

/// How one word's update is assembled from its contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Mis-ranked neighbors contribute `sign · cos · row`, and the mean
    /// contribution is normalized to unit length before the step. The
    /// cosine factor damps large-error pairs, so no single pair dominates.
    InverseError,
    /// Plain SGD on the rank error: neighbors contribute `error · row`,
    /// negatives `−row`, and the mean is applied as-is. Kept for
    /// comparison runs; large errors dominate and typically harm quality.
    Standard,
}

/// Word visitation order within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordOrder {
    /// Ascending row id — fixed and reproducible.
    Ascending,
    /// Seeded permutation, re-drawn every epoch.
    Shuffled { seed: u64 },
}

/// Whether updates see earlier updates from the same epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Each update reads the current matrix, including rows already moved
    /// this epoch. Sequential by construction.
    InPlace,
    /// All updates are computed against the epoch-start matrix and applied
    /// together at the end; the computation parallelizes across words.
    Snapshot,
}

/// Where the negative-sampling threshold δ comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSpec {
    /// Estimate from random vectors of the embedding's dimensionality.
    /// `sample_size` defaults to min(5000, vocabulary size).
    Auto {
        sample_size: Option<usize>,
        seed: u64,
    },
    /// Fixed value; anything above 1.0 disables negatives entirely.
    Explicit(f64),
}

/// Fine-tuning hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    /// Step size σ applied to the normalized update.
    pub learning_rate: f64,
    /// Stopping tolerance ε for the relative-improvement test.
    pub epsilon: f64,
    pub stop_mode: StopMode,
    /// Upper bound on epochs; 0 evaluates the initial losses and returns
    /// the input unchanged.
    pub max_epochs: usize,
    pub threshold: ThresholdSpec,
    /// Optional cap on labeled neighbors per word (desired ranks beyond
    /// the cap are ignored).
    pub rank_cap: Option<usize>,
    pub update_rule: UpdateRule,
    pub word_order: WordOrder,
    pub sweep_mode: SweepMode,
}

impl TrainConfig {
    /// Defaults from the published setup: σ = 0.1, stop on improvement
    /// relative to the initial loss, automatic threshold, ascending
    /// in-place sweep.
    pub fn new(epsilon: f64) -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epsilon,
            stop_mode: StopMode::RelativeToInitial,
            max_epochs: 100,
            threshold: ThresholdSpec::Auto {
                sample_size: None,
                seed: 0,
            },
            rank_cap: None,
            update_rule: UpdateRule::InverseError,
            word_order: WordOrder::Ascending,
            sweep_mode: SweepMode::InPlace,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Numeric(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Numeric(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.rank_cap == Some(0) {
            return Err(Error::Numeric("rank cap must be at least 1".to_string()));
        }
        if let ThresholdSpec::Explicit(d) = self.threshold {
            if !d.is_finite() {
                return Err(Error::Numeric(format!("threshold must be finite, got {d}")));
            }
        }
        Ok(())
    }
}

/// Stopping tolerances used in the published runs, keyed by the embedding
/// they were tuned for.
pub const EPSILON_PRESETS: &[(&str, f64)] = &[
    ("senna50", 0.04),
    ("skip50", 0.05),
    ("hlbl50", 0.004),
    ("glove300", 0.07),
    ("rnnlm640", 0.07),
    ("dep1000", 0.10),
];

/// Looks up a named ε preset (case-insensitive).
pub fn epsilon_preset(name: &str) -> Option<f64> {
    let lower = name.to_lowercase();
    EPSILON_PRESETS
        .iter()
        .find(|(n, _)| *n == lower)
        .map(|&(_, e)| e)
}

/// Label lists resolved against a concrete embedding: per row, neighbor
/// row ids in desired-rank order (position 0 ⇒ desired rank 1).
#[derive(Debug, Clone)]
pub struct CompiledLabels {
    lists: Vec<Vec<u32>>,
    labeled_rows: Vec<usize>,
    /// Labeled words that contributed nothing (token missing from the
    /// embedding, or every neighbor dropped).
    pub words_skipped: usize,
    /// Neighbor entries dropped (token missing, duplicate, or equal to
    /// the query after vocabulary folding).
    pub entries_skipped: usize,
}

impl CompiledLabels {
    pub fn list(&self, row: usize) -> &[u32] {
        &self.lists[row]
    }

    /// Rows with at least one usable label, ascending.
    pub fn labeled_rows(&self) -> &[usize] {
        &self.labeled_rows
    }

    pub fn labeled_words(&self) -> usize {
        self.labeled_rows.len()
    }

    pub fn total_entries(&self) -> usize {
        self.labeled_rows.iter().map(|&v| self.lists[v].len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled_rows.is_empty()
    }
}

/// Resolves label tokens to rows of `e`. Missing tokens are dropped and
/// surviving neighbors keep their relative order, so desired ranks stay
/// contiguous from 1. `rank_cap` truncates each list after the drops.
pub fn compile_labels(
    e: &Embedding,
    labels: &RankingLabelSet,
    rank_cap: Option<usize>,
) -> CompiledLabels {
    let cap = rank_cap.unwrap_or(usize::MAX);
    let mut lists = vec![Vec::new(); e.len()];
    let mut words_skipped = 0usize;
    let mut entries_skipped = 0usize;
    for (word, list) in labels.iter() {
        let Some(v) = e.vocab().id(word) else {
            words_skipped += 1;
            continue;
        };
        let mut compiled: Vec<u32> = Vec::new();
        for (neighbor, _score) in list {
            if compiled.len() >= cap {
                break;
            }
            let Some(j) = e.vocab().id(neighbor) else {
                entries_skipped += 1;
                continue;
            };
            if j == v || compiled.contains(&(j as u32)) {
                entries_skipped += 1;
                continue;
            }
            compiled.push(j as u32);
        }
        if compiled.is_empty() {
            words_skipped += 1;
        } else {
            lists[v] = compiled;
        }
    }
    let labeled_rows: Vec<usize> = (0..e.len()).filter(|&v| !lists[v].is_empty()).collect();
    CompiledLabels {
        lists,
        labeled_rows,
        words_skipped,
        entries_skipped,
    }
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(sum: &mut [f64], w: f64, row: ndarray::ArrayView1<'_, f64>) {
    if let Some(r) = row.as_slice() {
        for (s, x) in sum.iter_mut().zip(r) {
            *s += w * x;
        }
    } else {
        for (s, x) in sum.iter_mut().zip(row.iter()) {
            *s += w * x;
        }
    }
}

/// Computes the moved row for word `v`, or `None` when nothing pulls on it
/// (no mis-ranked neighbor, no above-threshold unlabeled word, or exactly
/// cancelling contributions). `labeled` is caller-provided scratch of
/// vocabulary size, all false on entry and restored on exit.
fn proposed_row(
    e: &Embedding,
    v: usize,
    neighbors: &[u32],
    labeled: &mut [bool],
    delta: f64,
    sigma: f64,
    rule: UpdateRule,
) -> Option<Vec<f64>> {
    let cos = cosines_for(e, v);
    let table = rank_from_cosines(&cos, v);
    for &j in neighbors {
        labeled[j as usize] = true;
    }
    let mut sum = vec![0.0; e.dim()];
    let mut count = 0usize;
    for (k, &j) in neighbors.iter().enumerate() {
        let desired = (k + 1) as i64;
        let actual = table.position(j as usize).expect("neighbor is ranked") as i64;
        let err = actual - desired;
        if err == 0 {
            continue;
        }
        let w = match rule {
            UpdateRule::InverseError => err.signum() as f64 * cos[j as usize],
            UpdateRule::Standard => err as f64,
        };
        axpy(&mut sum, w, e.row(j as usize));
        count += 1;
    }
    for (j, &c) in cos.iter().enumerate() {
        if j == v || labeled[j] {
            continue;
        }
        if c > delta {
            let w = match rule {
                UpdateRule::InverseError => -c,
                UpdateRule::Standard => -1.0,
            };
            axpy(&mut sum, w, e.row(j));
            count += 1;
        }
    }
    for &j in neighbors {
        labeled[j as usize] = false;
    }
    if count == 0 {
        return None;
    }
    let inv = 1.0 / count as f64;
    for s in sum.iter_mut() {
        *s *= inv;
    }
    if rule == UpdateRule::InverseError {
        let n = norm(&sum);
        if n == 0.0 {
            return None;
        }
        for s in sum.iter_mut() {
            *s /= n;
        }
    }
    let old = e.row(v);
    let mut row: Vec<f64> = old
        .iter()
        .zip(sum.iter())
        .map(|(o, u)| o + sigma * u)
        .collect();
    let n = norm(&row);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for x in row.iter_mut() {
        *x /= n;
    }
    Some(row)
}

/// Applies one ranking update to row `v` against the current matrix.
/// Returns whether the row moved.
pub fn word_update(
    e: &mut Embedding,
    v: usize,
    neighbors: &[u32],
    delta: f64,
    sigma: f64,
    rule: UpdateRule,
) -> bool {
    let mut scratch = vec![false; e.len()];
    match proposed_row(e, v, neighbors, &mut scratch, delta, sigma, rule) {
        Some(row) => {
            e.set_row(v, &row);
            true
        }
        None => false,
    }
}

fn sweep(
    e: &mut Embedding,
    labels: &CompiledLabels,
    order: &[usize],
    delta: f64,
    sigma: f64,
    rule: UpdateRule,
    mode: SweepMode,
) {
    match mode {
        SweepMode::InPlace => {
            let mut scratch = vec![false; e.len()];
            for &v in order {
                if let Some(row) =
                    proposed_row(e, v, labels.list(v), &mut scratch, delta, sigma, rule)
                {
                    e.set_row(v, &row);
                }
            }
        }
        SweepMode::Snapshot => {
            let start = e.clone();
            let rows: Vec<(usize, Option<Vec<f64>>)> = order
                .par_iter()
                .map_init(
                    || vec![false; start.len()],
                    |scratch, &v| {
                        (
                            v,
                            proposed_row(&start, v, labels.list(v), scratch, delta, sigma, rule),
                        )
                    },
                )
                .collect();
            for (v, row) in rows {
                if let Some(row) = row {
                    e.set_row(v, &row);
                }
            }
        }
    }
}

/// Ranking and similarity losses over all labeled words.
///
/// The ranking loss sums squared desired-vs-actual rank differences; the
/// similarity loss sums squared differences between the cosines sitting at
/// the desired and actual positions of the word's descending cosine list.
/// Unlabeled above-threshold words influence updates but not these losses.
pub fn losses(e: &Embedding, labels: &CompiledLabels) -> (f64, f64) {
    let per_word: Vec<(f64, f64)> = labels
        .labeled_rows()
        .par_iter()
        .map(|&v| {
            let cos = cosines_for(e, v);
            let table = rank_from_cosines(&cos, v);
            let sorted = table.sorted_cosines();
            let mut j_rank = 0.0;
            let mut j_simi = 0.0;
            for (k, &j) in labels.list(v).iter().enumerate() {
                let desired = k + 1;
                let actual = table.position(j as usize).expect("neighbor is ranked");
                let d = desired as f64 - actual as f64;
                j_rank += d * d;
                let dc = sorted[desired - 1] - sorted[actual - 1];
                j_simi += dc * dc;
            }
            (j_rank, j_simi)
        })
        .collect();
    per_word
        .into_iter()
        .fold((0.0, 0.0), |(jr, js), (r, s)| (jr + r, js + s))
}

/// One full sweep in the configured order followed by a loss evaluation;
/// returns (ranking loss, similarity loss) after the sweep.
pub fn epoch(
    e: &mut Embedding,
    labels: &CompiledLabels,
    delta: f64,
    cfg: &TrainConfig,
) -> (f64, f64) {
    let mut order: Vec<usize> = (0..e.len()).collect();
    if let WordOrder::Shuffled { seed } = cfg.word_order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    sweep(
        e,
        labels,
        &order,
        delta,
        cfg.learning_rate,
        cfg.update_rule,
        cfg.sweep_mode,
    );
    losses(e, labels)
}

/// Outcome of the stopping test for the most recent epoch transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    /// The relative improvement fell to ε or below.
    Criterion,
    /// The denominator loss is zero — nothing left to improve on.
    DegenerateLoss,
}

/// Evaluates the relative-improvement stop over a ranking-loss history
/// (index 0 is the pre-training evaluation). Needs at least one completed
/// transition; a non-positive denominator stops as degenerate.
pub fn should_stop(history: &[f64], epsilon: f64, mode: StopMode) -> StopDecision {
    if history.len() < 2 {
        return StopDecision::Continue;
    }
    let prev = history[history.len() - 2];
    let curr = history[history.len() - 1];
    let denom = match mode {
        StopMode::RelativeToPrevious => prev,
        StopMode::RelativeToInitial => history[0],
    };
    if denom <= 0.0 {
        return StopDecision::DegenerateLoss;
    }
    if (prev - curr) / denom <= epsilon {
        StopDecision::Criterion
    } else {
        StopDecision::Continue
    }
}

/// Why a fine-tuning run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The relative-improvement criterion fired.
    Criterion,
    /// The epoch budget ran out first.
    MaxEpochs,
    /// The denominator loss reached zero.
    DegenerateLoss,
}

/// Everything a fine-tuning run produced besides the embedding itself.
#[derive(Debug, Clone, Serialize)]
pub struct TrainState {
    /// Resolved negative-sampling threshold δ.
    pub threshold: f64,
    /// Completed epochs (excludes the epoch-0 evaluation).
    pub epochs_run: usize,
    /// Ranking loss per epoch, index 0 = before training.
    pub j_rank: Vec<f64>,
    /// Similarity loss per epoch, aligned with `j_rank`.
    pub j_simi: Vec<f64>,
    /// Wall-clock seconds per history row (index 0 covers the initial
    /// evaluation). The only non-deterministic output of a run.
    pub seconds: Vec<f64>,
    pub stopped: StopReason,
    /// Labeled words that could not be used against this embedding.
    pub words_skipped: usize,
    /// Neighbor entries that could not be used.
    pub entries_skipped: usize,
    /// Configuration the run actually used.
    pub config: TrainConfig,
}

/// Resolves the threshold specification against a concrete embedding.
pub fn resolve_threshold(e: &Embedding, spec: &ThresholdSpec) -> Result<f64> {
    match *spec {
        ThresholdSpec::Explicit(d) => {
            if !d.is_finite() {
                return Err(Error::Numeric(format!("threshold must be finite, got {d}")));
            }
            Ok(d)
        }
        ThresholdSpec::Auto { sample_size, seed } => {
            let sample = sample_size.unwrap_or_else(|| e.len().min(5000));
            random_threshold(e.dim(), sample, seed)
        }
    }
}

/// Fine-tunes an embedding against ranking labels: sweeps epochs until the
/// stopping criterion fires or the epoch budget runs out. Rows are
/// normalized up front if needed; every returned row has unit norm.
/// Deterministic for a fixed configuration (wall-clock timings aside).
pub fn finetune(
    e: Embedding,
    labels: &RankingLabelSet,
    cfg: &TrainConfig,
) -> Result<(Embedding, TrainState)> {
    cfg.validate()?;
    let mut e = if e.is_normalized() {
        e
    } else {
        e.normalize_rows()?
    };
    let compiled = compile_labels(&e, labels, cfg.rank_cap);
    if compiled.is_empty() {
        return Err(Error::Numeric(
            "no labeled words overlap the embedding vocabulary".to_string(),
        ));
    }
    let delta = resolve_threshold(&e, &cfg.threshold)?;

    let mut order: Vec<usize> = (0..e.len()).collect();
    let mut shuffle_rng = match cfg.word_order {
        WordOrder::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        WordOrder::Ascending => None,
    };

    let t0 = Instant::now();
    let (jr0, js0) = losses(&e, &compiled);
    let mut j_rank = vec![jr0];
    let mut j_simi = vec![js0];
    let mut seconds = vec![t0.elapsed().as_secs_f64()];

    let mut stopped = StopReason::MaxEpochs;
    let mut epochs_run = 0usize;
    for _ in 1..=cfg.max_epochs {
        let t = Instant::now();
        if let Some(rng) = shuffle_rng.as_mut() {
            order.shuffle(rng);
        }
        sweep(
            &mut e,
            &compiled,
            &order,
            delta,
            cfg.learning_rate,
            cfg.update_rule,
            cfg.sweep_mode,
        );
        let (jr, js) = losses(&e, &compiled);
        j_rank.push(jr);
        j_simi.push(js);
        seconds.push(t.elapsed().as_secs_f64());
        epochs_run += 1;
        match should_stop(&j_rank, cfg.epsilon, cfg.stop_mode) {
            StopDecision::Continue => {}
            StopDecision::Criterion => {
                stopped = StopReason::Criterion;
                break;
            }
            StopDecision::DegenerateLoss => {
                stopped = StopReason::DegenerateLoss;
                break;
            }
        }
    }

    let state = TrainState {
        threshold: delta,
        epochs_run,
        j_rank,
        j_simi,
        seconds,
        stopped,
        words_skipped: compiled.words_skipped,
        entries_skipped: compiled.entries_skipped,
        config: cfg.clone(),
    };
    Ok((e, state))
}
