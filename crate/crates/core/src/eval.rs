//! Intrinsic evaluation: similarity correlation, analogical reasoning, and
//! sentence completion, plus the dataset loaders and report shape they
//! share.
//!
//! All three protocols skip items the vocabulary cannot cover and report
//! how many; a task that cannot evaluate a single item is an error rather
//! than a silent zero.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::neighbors::{cosine_by_id, dot_seq};

/// Word pairs with human similarity judgements.
#[derive(Debug, Clone, Default)]
pub struct SimilarityDataset {
    items: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    pub fn new(items: Vec<(String, String, f64)>) -> Result<Self> {
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (w1, w2, score) in &items {
            if !score.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite score for pair ({w1}, {w2})"
                )));
            }
            if !seen.insert(unordered(w1, w2)) {
                return Err(Error::Numeric(format!("duplicate pair ({w1}, {w2})")));
            }
        }
        Ok(SimilarityDataset { items })
    }

    /// Loads `word1\tword2\tscore` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!(
                        "expected `word1\\tword2\\tscore`, found {} fields",
                        fields.len()
                    ),
                ));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad score `{}`", fields[2])))?;
            if !score.is_finite() {
                return Err(Error::parse(path, lineno, "non-finite score".to_string()));
            }
            if !seen.insert(unordered(fields[0], fields[1])) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate pair ({}, {})", fields[0], fields[1]),
                ));
            }
            items.push((fields[0].to_string(), fields[1].to_string(), score));
        }
        Ok(SimilarityDataset { items })
    }

    /// Folds pairs to lowercase, keeping the first of any pairs that
    /// collide; returns the dataset and how many were dropped.
    pub fn lowercased(self) -> (Self, usize) {
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut items = Vec::new();
        let mut dropped = 0usize;
        for (w1, w2, score) in self.items {
            let (w1, w2) = (w1.to_lowercase(), w2.to_lowercase());
            if seen.insert(unordered(&w1, &w2)) {
                items.push((w1, w2, score));
            } else {
                dropped += 1;
            }
        }
        (SimilarityDataset { items }, dropped)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String, f64)> {
        self.items.iter()
    }
}

fn unordered(w1: &str, w2: &str) -> (String, String) {
    if w1 <= w2 {
        (w1.to_string(), w2.to_string())
    } else {
        (w2.to_string(), w1.to_string())
    }
}

/// One `a : b = c : answer` question, optionally tagged with the section
/// it came from.
#[derive(Debug, Clone)]
pub struct AnalogyItem {
    pub a: String,
    pub b: String,
    pub c: String,
    pub answer: String,
    pub section: Option<String>,
}

/// Analogy questions; every item holds four distinct tokens.
#[derive(Debug, Clone, Default)]
pub struct AnalogyDataset {
    items: Vec<AnalogyItem>,
}

impl AnalogyDataset {
    pub fn new(items: Vec<AnalogyItem>) -> Result<Self> {
        for it in &items {
            if !distinct_four(&it.a, &it.b, &it.c, &it.answer) {
                return Err(Error::Numeric(format!(
                    "analogy item `{} {} {} {}` repeats a token",
                    it.a, it.b, it.c, it.answer
                )));
            }
        }
        Ok(AnalogyDataset { items })
    }

    /// Loads `a b c answer` lines; lines starting with `:` name a section
    /// applied to the items that follow.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        let mut section: Option<String> = None;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix(':') {
                section = Some(name.trim().to_string());
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected four tokens, found {}", fields.len()),
                ));
            }
            if !distinct_four(fields[0], fields[1], fields[2], fields[3]) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("item `{trimmed}` repeats a token"),
                ));
            }
            items.push(AnalogyItem {
                a: fields[0].to_string(),
                b: fields[1].to_string(),
                c: fields[2].to_string(),
                answer: fields[3].to_string(),
                section: section.clone(),
            });
        }
        Ok(AnalogyDataset { items })
    }

    /// Folds items to lowercase, dropping any whose four tokens are no
    /// longer distinct; returns the dataset and how many were dropped.
    pub fn lowercased(self) -> (Self, usize) {
        let mut items = Vec::new();
        let mut dropped = 0usize;
        for it in self.items {
            let folded = AnalogyItem {
                a: it.a.to_lowercase(),
                b: it.b.to_lowercase(),
                c: it.c.to_lowercase(),
                answer: it.answer.to_lowercase(),
                section: it.section,
            };
            if distinct_four(&folded.a, &folded.b, &folded.c, &folded.answer) {
                items.push(folded);
            } else {
                dropped += 1;
            }
        }
        (AnalogyDataset { items }, dropped)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AnalogyItem> {
        self.items.iter()
    }
}

fn distinct_four(a: &str, b: &str, c: &str, d: &str) -> bool {
    a != b && a != c && a != d && b != c && b != d && c != d
}

/// One fill-in-the-blank question: the sentence's remaining words, five
/// candidate words, and the index of the original word.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionItem {
    pub context: Vec<String>,
    pub candidates: Vec<String>,
    pub answer: usize,
}

/// Sentence-completion questions.
#[derive(Debug, Clone, Default)]
pub struct CompletionDataset {
    items: Vec<CompletionItem>,
}

impl CompletionDataset {
    pub fn new(items: Vec<CompletionItem>) -> Result<Self> {
        for (i, it) in items.iter().enumerate() {
            validate_completion_item(it)
                .map_err(|msg| Error::Numeric(format!("completion item {}: {msg}", i + 1)))?;
        }
        Ok(CompletionDataset { items })
    }

    /// Loads one JSON record per line:
    /// `{"context": [...], "candidates": [five words], "answer": 0-4}`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let item: CompletionItem = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            validate_completion_item(&item).map_err(|msg| Error::parse(path, lineno, msg))?;
            items.push(item);
        }
        Ok(CompletionDataset { items })
    }

    /// Folds context and candidate words to lowercase.
    pub fn lowercased(self) -> Self {
        let items = self
            .items
            .into_iter()
            .map(|it| CompletionItem {
                context: it.context.iter().map(|w| w.to_lowercase()).collect(),
                candidates: it.candidates.iter().map(|w| w.to_lowercase()).collect(),
                answer: it.answer,
            })
            .collect();
        CompletionDataset { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CompletionItem> {
        self.items.iter()
    }
}

fn validate_completion_item(item: &CompletionItem) -> std::result::Result<(), String> {
    if item.candidates.len() != 5 {
        return Err(format!(
            "expected 5 candidates, found {}",
            item.candidates.len()
        ));
    }
    if item.answer > 4 {
        return Err(format!("answer index {} out of range 0..=4", item.answer));
    }
    Ok(())
}

/// Ranks both lists (ties share their average rank) and returns the
/// Pearson correlation of the rank vectors.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Numeric(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Numeric("need at least two observations".to_string()));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite observation".to_string()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean_x: f64 = rx.iter().sum::<f64>() / n;
    let mean_y: f64 = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in rx.iter().zip(ry.iter()) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::Numeric(
            "undefined correlation for constant input".to_string(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// 1-based ranks in ascending value order; tied values share the average
/// of the positions they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Metric value plus the item bookkeeping every protocol reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskOutcome {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl TaskOutcome {
    /// Fraction of dataset items the vocabulary covered.
    pub fn coverage(&self) -> f64 {
        let total = self.evaluated + self.skipped;
        if total == 0 {
            0.0
        } else {
            self.evaluated as f64 / total as f64
        }
    }
}

/// Correlates machine cosines with human judgements. Pairs with an unknown
/// word are skipped and counted; fewer than two usable pairs is an error.
pub fn eval_similarity(e: &Embedding, ds: &SimilarityDataset) -> Result<TaskOutcome> {
    let mut machine = Vec::new();
    let mut human = Vec::new();
    let mut skipped = 0usize;
    for (w1, w2, score) in ds.iter() {
        match (e.vocab().id(w1), e.vocab().id(w2)) {
            (Some(i), Some(j)) => {
                machine.push(cosine_by_id(e, i, j));
                human.push(*score);
            }
            _ => skipped += 1,
        }
    }
    if machine.len() < 2 {
        return Err(Error::Numeric(format!(
            "only {} of {} pairs are in the vocabulary; need at least 2",
            machine.len(),
            ds.len()
        )));
    }
    Ok(TaskOutcome {
        value: spearman(&machine, &human)?,
        evaluated: machine.len(),
        skipped,
    })
}

/// Answers `a : b = c : ?` with the vocabulary word most similar to
/// `row(b) − row(a) + row(c)`, excluding the three query words; ties go to
/// the lowest row id.
pub fn solve_analogy(e: &Embedding, a: &str, b: &str, c: &str) -> Result<String> {
    let ia = e.vocab().require(a)?;
    let ib = e.vocab().require(b)?;
    let ic = e.vocab().require(c)?;
    let mut target = Array1::<f64>::zeros(e.dim());
    for (t, ((x, y), z)) in target
        .iter_mut()
        .zip(e.row(ib).iter().zip(e.row(ia).iter()).zip(e.row(ic).iter()))
    {
        *t = x - y + z;
    }
    let mut best: Option<(usize, f64)> = None;
    for j in 0..e.len() {
        if j == ia || j == ib || j == ic {
            continue;
        }
        let d = dot_seq(e.row(j), target.view());
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((j, d));
        }
    }
    match best {
        Some((j, _)) => Ok(e.vocab().word(j).to_string()),
        None => Err(Error::Numeric(
            "vocabulary holds no candidate answers".to_string(),
        )),
    }
}

/// Accuracy over analogy questions; items with any unknown token among
/// the four words are skipped and counted. No attemptable item is an
/// error.
pub fn eval_analogy(e: &Embedding, ds: &AnalogyDataset) -> Result<TaskOutcome> {
    let results: Vec<Option<bool>> = ds
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|it| {
            let known = [&it.a, &it.b, &it.c, &it.answer]
                .iter()
                .all(|t| e.vocab().contains(t));
            if !known {
                return None;
            }
            let got = solve_analogy(e, &it.a, &it.b, &it.c)
                .expect("all four tokens verified in vocabulary");
            Some(got == it.answer)
        })
        .collect();
    let evaluated = results.iter().flatten().count();
    let correct = results.iter().flatten().filter(|&&ok| ok).count();
    if evaluated == 0 {
        return Err(Error::Numeric(
            "no analogy item could be attempted".to_string(),
        ));
    }
    Ok(TaskOutcome {
        value: correct as f64 / evaluated as f64,
        evaluated,
        skipped: ds.len() - evaluated,
    })
}

/// Accuracy over completion questions. A candidate's score is its mean
/// cosine to the in-vocab context words; the highest-scoring candidate
/// wins, ties going to the earlier candidate. Items needing an unknown
/// candidate (or with no usable context word) are skipped and counted.
pub fn eval_completion(e: &Embedding, ds: &CompletionDataset) -> Result<TaskOutcome> {
    let mut evaluated = 0usize;
    let mut correct = 0usize;
    let mut skipped = 0usize;
    for item in ds.iter() {
        let candidate_ids: Option<Vec<usize>> =
            item.candidates.iter().map(|w| e.vocab().id(w)).collect();
        let context_ids: Vec<usize> = item
            .context
            .iter()
            .filter_map(|w| e.vocab().id(w))
            .collect();
        let Some(candidate_ids) = candidate_ids else {
            skipped += 1;
            continue;
        };
        if context_ids.is_empty() {
            skipped += 1;
            continue;
        }
        let mut chosen = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (k, &cid) in candidate_ids.iter().enumerate() {
            let mut sum = 0.0;
            for &wid in &context_ids {
                sum += cosine_by_id(e, cid, wid);
            }
            let score = sum / context_ids.len() as f64;
            if score > best {
                best = score;
                chosen = k;
            }
        }
        evaluated += 1;
        if chosen == item.answer {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Numeric(
            "no completion item could be attempted".to_string(),
        ));
    }
    Ok(TaskOutcome {
        value: correct as f64 / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// One row of an evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub coverage: f64,
}

/// Results across the evaluated tasks, serializable as JSON and printable
/// as an aligned text table.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskReport>,
}

impl EvalReport {
    pub fn push(&mut self, task: &str, metric: &str, outcome: &TaskOutcome) {
        self.tasks.push(TaskReport {
            task: task.to_string(),
            metric: metric.to_string(),
            value: outcome.value,
            evaluated: outcome.evaluated,
            skipped: outcome.skipped,
            coverage: outcome.coverage(),
        });
    }

    /// Renders the report as a column-aligned text table.
    pub fn text_table(&self) -> String {
        let header = [
            "task",
            "metric",
            "value",
            "evaluated",
            "skipped",
            "coverage",
        ];
        let rows: Vec<[String; 6]> = self
            .tasks
            .iter()
            .map(|t| {
                [
                    t.task.clone(),
                    t.metric.clone(),
                    format!("{:.4}", t.value),
                    t.evaluated.to_string(),
                    t.skipped.to_string(),
                    format!("{:.3}", t.coverage),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row.iter()) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let render = |cells: &[String], widths: &[usize], out: &mut String| {
            for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                out.push_str(cell);
                for _ in cell.len()..*w {
                    out.push(' ');
                }
            }
            while out.ends_with(' ') {
                out.pop();
            }
            out.push('\n');
        };
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        render(&header, &widths, &mut out);
        for row in &rows {
            render(row, &widths, &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Vocabulary;
    use ndarray::Array2;
    use tempfile::TempDir;

    fn toy(words: &[&str], rows: &[&[f64]]) -> Embedding {
        let vocab = Vocabulary::from_words(words.iter().map(|w| w.to_string())).unwrap();
        let dim = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let matrix = Array2::from_shape_vec((rows.len(), dim), flat).unwrap();
        Embedding::from_parts(vocab, matrix)
            .unwrap()
            .normalize_rows()
            .unwrap()
    }

    fn unit(theta_cos: f64) -> [f64; 2] {
        [theta_cos, (1.0 - theta_cos * theta_cos).sqrt()]
    }

    #[test]
    fn spearman_identical_and_reversed() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_classic_fixture() {
        // Rank differences (1,1,1,1,0): ρ = 1 − 6·4/(5·24) = 0.8.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
        assert!((spearman(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_averages_tied_ranks() {
        // Both lists tie their first two values the same way: perfect
        // rank agreement even though values differ.
        let xs = [1.0, 1.0, 2.0];
        let ys = [10.0, 10.0, 30.0];
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        // One list breaks the tie the other keeps: |ρ| < 1.
        let zs = [10.0, 20.0, 30.0];
        let rho = spearman(&xs, &zs).unwrap();
        assert!(rho < 1.0 && rho > 0.0);
    }

    #[test]
    fn spearman_rejects_degenerate_input() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transform() {
        let xs = [0.3, -0.2, 0.9, 0.1, 0.5];
        let ys = [1.0, 0.4, 2.2, 0.6, 1.4];
        let base = spearman(&xs, &ys).unwrap();
        let squashed: Vec<f64> = ys.iter().map(|y| y.tanh() * 3.0 + 7.0).collect();
        let transformed = spearman(&xs, &squashed).unwrap();
        assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn similarity_eval_perfect_when_scores_equal_cosines() {
        let e = toy(
            &["a", "b", "c", "d"],
            &[&[1.0, 0.0], &unit(0.9), &unit(0.6), &unit(0.2)],
        );
        let items = vec![
            ("a".into(), "b".into(), 0.9),
            ("a".into(), "c".into(), 0.6),
            ("a".into(), "d".into(), 0.2),
        ];
        let ds = SimilarityDataset::new(items).unwrap();
        let out = eval_similarity(&e, &ds).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12);
        assert_eq!(out.evaluated, 3);
        assert_eq!(out.skipped, 0);
        assert!((out.coverage() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_eval_skips_unknown_words() {
        let e = toy(&["a", "b", "c"], &[&[1.0, 0.0], &unit(0.9), &unit(0.2)]);
        let items = vec![
            ("a".into(), "b".into(), 1.0),
            ("a".into(), "c".into(), 0.1),
            ("a".into(), "zzz".into(), 0.5),
        ];
        let ds = SimilarityDataset::new(items).unwrap();
        let out = eval_similarity(&e, &ds).unwrap();
        assert_eq!(out.evaluated, 2);
        assert_eq!(out.skipped, 1);
        // Reversed judgements over the two usable pairs: ρ = 1 here since
        // human (1.0, 0.1) agrees with cosine (0.9, 0.2) ordering.
        assert!((out.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_eval_needs_two_usable_pairs() {
        let e = toy(&["a", "b"], &[&[1.0, 0.0], &unit(0.9)]);
        let items = vec![
            ("a".into(), "b".into(), 1.0),
            ("a".into(), "zzz".into(), 0.5),
        ];
        let ds = SimilarityDataset::new(items).unwrap();
        assert!(eval_similarity(&e, &ds).is_err());
    }

    #[test]
    fn similarity_rho_is_rotation_invariant() {
        let e = toy(
            &["a", "b", "c", "d"],
            &[&[1.0, 0.0], &unit(0.8), &unit(0.5), &unit(-0.3)],
        );
        let theta: f64 = 0.7;
        let (s, c) = theta.sin_cos();
        let rotated: Vec<Vec<f64>> = (0..e.len())
            .map(|i| {
                let r = e.row(i);
                vec![c * r[0] - s * r[1], s * r[0] + c * r[1]]
            })
            .collect();
        let rot_refs: Vec<&[f64]> = rotated.iter().map(|r| r.as_slice()).collect();
        let e2 = toy(&["a", "b", "c", "d"], &rot_refs);
        let items = vec![
            ("a".into(), "b".into(), 0.9),
            ("b".into(), "c".into(), 0.4),
            ("c".into(), "d".into(), 0.2),
            ("a".into(), "d".into(), 0.1),
        ];
        let ds = SimilarityDataset::new(items).unwrap();
        let r1 = eval_similarity(&e, &ds).unwrap().value;
        let r2 = eval_similarity(&e2, &ds).unwrap().value;
        assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn analogy_solves_constructed_basis_instance() {
        // d ∝ b − a + c in a 3-D basis: the offset points exactly at d.
        let e = toy(
            &["a", "b", "c", "d", "x"],
            &[
                &[1.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0],
                &[-1.0, 1.0, 1.0],
                &[0.5, -0.5, 0.0],
            ],
        );
        assert_eq!(solve_analogy(&e, "a", "b", "c").unwrap(), "d");
    }

    #[test]
    fn analogy_with_equal_ends_reduces_to_nearest_neighbor() {
        // a = c ⇒ target = row(b); nearest to b excluding {a, b}.
        let e = toy(
            &["a", "b", "n", "f"],
            &[&[1.0, 0.0], &unit(0.2), &unit(0.3), &[-0.9, 0.1]],
        );
        // cos(b, n) is highest among words other than a and b.
        assert_eq!(solve_analogy(&e, "a", "b", "a").unwrap(), "n");
    }

    #[test]
    fn analogy_tie_goes_to_lower_row_id() {
        let e = toy(
            &["a", "b", "c", "d1", "d2"],
            &[
                &[1.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0],
                &[-1.0, 1.0, 1.0],
                &[-1.0, 1.0, 1.0],
            ],
        );
        assert_eq!(solve_analogy(&e, "a", "b", "c").unwrap(), "d1");
    }

    #[test]
    fn analogy_unknown_token_is_an_error() {
        let e = toy(
            &["a", "b", "c", "d"],
            &[&[1.0, 0.0], &unit(0.5), &unit(0.2), &unit(-0.4)],
        );
        assert!(solve_analogy(&e, "a", "b", "zzz").is_err());
    }

    #[test]
    fn analogy_accuracy_counts_skips() {
        let e = toy(
            &["a", "b", "c", "d", "w"],
            &[
                &[1.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0],
                &[-1.0, 1.0, 1.0],
                &[0.3, -0.8, 0.1],
            ],
        );
        let items = vec![
            AnalogyItem {
                a: "a".into(),
                b: "b".into(),
                c: "c".into(),
                answer: "d".into(),
                section: None,
            },
            AnalogyItem {
                a: "a".into(),
                b: "b".into(),
                c: "zzz".into(),
                answer: "d".into(),
                section: None,
            },
        ];
        let ds = AnalogyDataset::new(items).unwrap();
        let out = eval_analogy(&e, &ds).unwrap();
        assert_eq!(out.evaluated, 1);
        assert_eq!(out.skipped, 1);
        assert!((out.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analogy_accuracy_fraction_matches_item_count() {
        // Ten attemptable items: seven point at the true offset word,
        // three claim a far-away word instead and score as wrong.
        let e = toy(
            &["a", "b", "c", "d", "w"],
            &[
                &[1.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0],
                &[-1.0, 1.0, 1.0],
                &[0.3, -0.8, 0.1],
            ],
        );
        let mut items = Vec::new();
        for i in 0..10 {
            let answer = if i < 7 { "d" } else { "w" };
            items.push(AnalogyItem {
                a: "a".into(),
                b: "b".into(),
                c: "c".into(),
                answer: answer.into(),
                section: None,
            });
        }
        let ds = AnalogyDataset::new(items).unwrap();
        let out = eval_analogy(&e, &ds).unwrap();
        assert_eq!(out.evaluated, 10);
        assert!((out.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn analogy_all_skipped_is_an_error() {
        let e = toy(
            &["a", "b", "c", "d"],
            &[&[1.0, 0.0], &unit(0.5), &unit(0.2), &unit(-0.4)],
        );
        let items = vec![AnalogyItem {
            a: "zzz".into(),
            b: "b".into(),
            c: "c".into(),
            answer: "d".into(),
            section: None,
        }];
        let ds = AnalogyDataset::new(items).unwrap();
        assert!(eval_analogy(&e, &ds).is_err());
    }

    #[test]
    fn completion_picks_identical_candidate() {
        let e = toy(
            &["w", "c0", "c1", "c2", "c3", "c4"],
            &[
                &unit(0.4),
                &[1.0, 0.0],
                &unit(0.2),
                &unit(0.4), // identical direction to the context word
                &unit(-0.3),
                &unit(0.1),
            ],
        );
        let item = CompletionItem {
            context: vec!["w".into()],
            candidates: vec![
                "c0".into(),
                "c1".into(),
                "c2".into(),
                "c3".into(),
                "c4".into(),
            ],
            answer: 2,
        };
        let ds = CompletionDataset::new(vec![item]).unwrap();
        let out = eval_completion(&e, &ds).unwrap();
        assert!((out.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn completion_uses_mean_over_context_words() {
        // Candidate c0 against context (w1, w2): mean cosine (0.9 + 0.1)/2
        // = 0.5 loses to c1's (0.6 + 0.6)/2 = 0.6.
        let e = toy(
            &["w1", "w2", "c0", "c1", "x", "y", "z"],
            &[
                &[1.0, 0.0],
                &unit(0.2),
                &unit(0.9),
                &unit(0.787846202), // ≈ cos(acos(0.6·) …) tuned below
                &unit(-0.5),
                &unit(-0.7),
                &unit(-0.9),
            ],
        );
        // Rather than tune angles by hand, compute the two means directly
        // and assert the evaluator agrees with the direct computation.
        let item = CompletionItem {
            context: vec!["w1".into(), "w2".into()],
            candidates: vec!["c0".into(), "c1".into(), "x".into(), "y".into(), "z".into()],
            answer: 0,
        };
        let mean = |cand: &str| {
            let ci = e.vocab().id(cand).unwrap();
            (cosine_by_id(&e, ci, 0) + cosine_by_id(&e, ci, 1)) / 2.0
        };
        let best = ["c0", "c1", "x", "y", "z"]
            .iter()
            .enumerate()
            .max_by(|a, b| mean(a.1).partial_cmp(&mean(b.1)).unwrap())
            .unwrap()
            .0;
        let ds = CompletionDataset::new(vec![item]).unwrap();
        let out = eval_completion(&e, &ds).unwrap();
        let expect = if best == 0 { 1.0 } else { 0.0 };
        assert!((out.value - expect).abs() < 1e-12);
        assert_eq!(out.evaluated, 1);
    }

    #[test]
    fn completion_tie_picks_first_candidate() {
        // All candidates identical: scores tie exactly, first one wins.
        let e = toy(
            &["w", "c0", "c1", "c2", "c3", "c4"],
            &[
                &[1.0, 0.0],
                &unit(0.5),
                &unit(0.5),
                &unit(0.5),
                &unit(0.5),
                &unit(0.5),
            ],
        );
        let make = |answer: usize| CompletionItem {
            context: vec!["w".into()],
            candidates: vec![
                "c0".into(),
                "c1".into(),
                "c2".into(),
                "c3".into(),
                "c4".into(),
            ],
            answer,
        };
        let ds = CompletionDataset::new(vec![make(0), make(3)]).unwrap();
        let out = eval_completion(&e, &ds).unwrap();
        assert!((out.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn completion_skips_unknown_candidates_and_empty_context() {
        let e = toy(
            &["w", "c0", "c1", "c2", "c3", "c4"],
            &[
                &[1.0, 0.0],
                &unit(0.5),
                &unit(0.4),
                &unit(0.3),
                &unit(0.2),
                &unit(0.1),
            ],
        );
        let full = CompletionItem {
            context: vec!["w".into()],
            candidates: vec![
                "c0".into(),
                "c1".into(),
                "c2".into(),
                "c3".into(),
                "c4".into(),
            ],
            answer: 0,
        };
        let oov_candidate = CompletionItem {
            candidates: vec![
                "zzz".into(),
                "c1".into(),
                "c2".into(),
                "c3".into(),
                "c4".into(),
            ],
            ..full.clone()
        };
        let oov_context = CompletionItem {
            context: vec!["qqq".into()],
            ..full.clone()
        };
        let ds = CompletionDataset::new(vec![full, oov_candidate, oov_context]).unwrap();
        let out = eval_completion(&e, &ds).unwrap();
        assert_eq!(out.evaluated, 1);
        assert_eq!(out.skipped, 2);
    }

    #[test]
    fn similarity_loader_round_trip_and_errors() {
        let dir = TempDir::new().unwrap();
        let good = dir.path().join("pairs.tsv");
        std::fs::write(&good, "cat\tdog\t7.5\nfish\tsalmon\t8.2\n\n").unwrap();
        let ds = SimilarityDataset::load(&good).unwrap();
        assert_eq!(ds.len(), 2);
        let bad_score = dir.path().join("bad.tsv");
        std::fs::write(&bad_score, "cat\tdog\tseven\n").unwrap();
        let err = SimilarityDataset::load(&bad_score).unwrap_err();
        assert!(err.to_string().contains("bad.tsv:1"), "{err}");
        let dup = dir.path().join("dup.tsv");
        std::fs::write(&dup, "cat\tdog\t7.5\ndog\tcat\t3.0\n").unwrap();
        let err = SimilarityDataset::load(&dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let fields = dir.path().join("fields.tsv");
        std::fs::write(&fields, "cat dog 7.5\n").unwrap();
        assert!(SimilarityDataset::load(&fields).is_err());
    }

    #[test]
    fn analogy_loader_handles_sections_and_errors() {
        let dir = TempDir::new().unwrap();
        let good = dir.path().join("questions.txt");
        std::fs::write(
            &good,
            ": capital-common\nathens greece baghdad iraq\n: family\nboy girl king queen\n",
        )
        .unwrap();
        let ds = AnalogyDataset::load(&good).unwrap();
        assert_eq!(ds.len(), 2);
        let items: Vec<&AnalogyItem> = ds.iter().collect();
        assert_eq!(items[0].section.as_deref(), Some("capital-common"));
        assert_eq!(items[1].section.as_deref(), Some("family"));
        assert_eq!(items[1].answer, "queen");

        let bad = dir.path().join("three.txt");
        std::fs::write(&bad, "a b c\n").unwrap();
        assert!(AnalogyDataset::load(&bad).is_err());
        let repeat = dir.path().join("repeat.txt");
        std::fs::write(&repeat, "a b a d\n").unwrap();
        let err = AnalogyDataset::load(&repeat).unwrap_err();
        assert!(err.to_string().contains("repeats"), "{err}");
    }

    #[test]
    fn completion_loader_validates_shape() {
        let dir = TempDir::new().unwrap();
        let good = dir.path().join("questions.jsonl");
        std::fs::write(
            &good,
            concat!(
                r#"{"context": ["the", "cat"], "candidates": ["a","b","c","d","e"], "answer": 2}"#,
                "\n",
            ),
        )
        .unwrap();
        let ds = CompletionDataset::load(&good).unwrap();
        assert_eq!(ds.len(), 1);

        let four = dir.path().join("four.jsonl");
        std::fs::write(
            &four,
            r#"{"context": ["x"], "candidates": ["a","b","c","d"], "answer": 0}"#,
        )
        .unwrap();
        let err = CompletionDataset::load(&four).unwrap_err();
        assert!(err.to_string().contains("5 candidates"), "{err}");

        let oor = dir.path().join("oor.jsonl");
        std::fs::write(
            &oor,
            r#"{"context": ["x"], "candidates": ["a","b","c","d","e"], "answer": 5}"#,
        )
        .unwrap();
        assert!(CompletionDataset::load(&oor).is_err());

        let garbage = dir.path().join("garbage.jsonl");
        std::fs::write(&garbage, "not json\n").unwrap();
        let err = CompletionDataset::load(&garbage).unwrap_err();
        assert!(err.to_string().contains("garbage.jsonl:1"), "{err}");
    }

    #[test]
    fn lowercase_folding_drops_collisions() {
        let ds = SimilarityDataset::new(vec![
            ("Cat".into(), "Dog".into(), 1.0),
            ("cat".into(), "dog".into(), 2.0),
        ])
        .unwrap();
        let (folded, dropped) = ds.lowercased();
        assert_eq!(folded.len(), 1);
        assert_eq!(dropped, 1);
        assert_eq!(folded.iter().next().unwrap().2, 1.0);

        let ds = AnalogyDataset::new(vec![AnalogyItem {
            a: "A".into(),
            b: "a".into(),
            c: "b".into(),
            answer: "c".into(),
            section: None,
        }])
        .unwrap();
        let (folded, dropped) = ds.lowercased();
        assert_eq!(folded.len(), 0);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn report_table_is_aligned_and_complete() {
        let mut report = EvalReport::default();
        report.push(
            "similarity",
            "spearman",
            &TaskOutcome {
                value: 0.55,
                evaluated: 300,
                skipped: 53,
            },
        );
        report.push(
            "analogy",
            "accuracy",
            &TaskOutcome {
                value: 0.7,
                evaluated: 7,
                skipped: 3,
            },
        );
        let table = report.text_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("task"));
        assert!(lines[1].contains("similarity") && lines[1].contains("0.5500"));
        assert!(lines[2].contains("analogy") && lines[2].contains("0.7000"));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"coverage\""));
    }
}
