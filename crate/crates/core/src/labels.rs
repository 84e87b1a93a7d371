//! Ranking-label generation: per-embedding neighbor credit, multi-source
//! fusion, lexicon injection, and the label file format.
//!
//! For every word each source embedding contributes its top-N neighbors,
//! each credited with `cosine / max cosine` (so the nearest neighbor always
//! earns 1.0). Credits are summed across sources, pairs selected by too few
//! sources are dropped, and the surviving sums are divided by the number of
//! sources in which the pair co-occurs. The result is, per word, a ranked
//! list of related words whose order is the training target; the fused
//! score itself is kept for diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::embedding::{union_vocabulary, Embedding, Vocabulary};
use crate::error::{Error, Result};
use crate::neighbors::top_k_ids;

/// Undirected word pairs from a human-curated lexicon, all weighted 1.
#[derive(Debug, Clone, Default)]
pub struct LexiconPairs {
    pairs: Vec<(String, String)>,
}

impl LexiconPairs {
    /// Builds a pair set; self-pairs are rejected and duplicates (in either
    /// orientation) collapse to one entry.
    pub fn new<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut out = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Numeric(format!("lexicon self-pair `{a}`")));
            }
            let key = if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            if seen.insert(key) {
                out.push((a, b));
            }
        }
        Ok(LexiconPairs { pairs: out })
    }

    /// Loads `word1\tword2` lines (any whitespace separates the two).
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected two tokens, found {}", fields.len()),
                ));
            }
            if fields[0] == fields[1] {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("self-pair `{}`", fields[0]),
                ));
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        LexiconPairs::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String)> {
        self.pairs.iter()
    }
}

/// Per-pair running totals over the fused vocabulary: cumulative credit,
/// times selected, and enough membership information to recover how many
/// sources contain the pair.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    vocab: Vocabulary,
    /// (query id, neighbor id) → (credit sum, times selected).
    cells: BTreeMap<(u32, u32), (f64, u32)>,
    /// Per input embedding: membership of each fused-vocabulary token.
    membership: Vec<Vec<bool>>,
    /// Directed pairs contributed by a lexicon (counts as one extra source
    /// for exactly those pairs).
    lexicon_pairs: BTreeSet<(u32, u32)>,
    /// Words skipped because their best neighbor cosine was not positive.
    skipped_degenerate: usize,
}

impl ScoreAccumulator {
    /// Fused vocabulary (union of all sources, first-appearance order).
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Cumulative credit D for a directed pair.
    pub fn credit_sum(&self, w1: &str, w2: &str) -> f64 {
        self.cell(w1, w2).map(|c| c.0).unwrap_or(0.0)
    }

    /// Times-selected count C for a directed pair.
    pub fn times_selected(&self, w1: &str, w2: &str) -> u32 {
        self.cell(w1, w2).map(|c| c.1).unwrap_or(0)
    }

    /// Co-presence count S: sources whose vocabulary contains both words,
    /// plus one if a lexicon contributed this pair.
    pub fn co_presence(&self, w1: &str, w2: &str) -> u32 {
        let (Some(i), Some(j)) = (self.vocab.id(w1), self.vocab.id(w2)) else {
            return 0;
        };
        self.co_presence_ids(i as u32, j as u32)
    }

    fn co_presence_ids(&self, i: u32, j: u32) -> u32 {
        let mut s = self
            .membership
            .iter()
            .filter(|m| m[i as usize] && m[j as usize])
            .count() as u32;
        if self.lexicon_pairs.contains(&(i, j)) {
            s += 1;
        }
        s
    }

    /// Words whose neighbor lists were skipped for non-positive max cosine.
    pub fn skipped_degenerate(&self) -> usize {
        self.skipped_degenerate
    }

    fn cell(&self, w1: &str, w2: &str) -> Option<&(f64, u32)> {
        let i = self.vocab.id(w1)? as u32;
        let j = self.vocab.id(w2)? as u32;
        self.cells.get(&(i, j))
    }
}

/// Converts a top-N neighbor list into credits `cosine / max cosine`.
///
/// Returns `None` when the list is empty or its best cosine is not positive
/// (degenerate geometry — the word is skipped and counted by the caller).
pub fn credit(neighbors: &[(usize, f64)]) -> Option<Vec<(usize, f64)>> {
    let max = neighbors.first()?.1;
    if max <= 0.0 {
        return None;
    }
    Some(neighbors.iter().map(|&(j, c)| (j, c / max)).collect())
}

/// Runs the per-embedding selection step: every word's top-N neighbors are
/// credited and added into the accumulator, per source.
pub fn accumulate(embeddings: &[Embedding], top_n: usize) -> Result<ScoreAccumulator> {
    if embeddings.is_empty() {
        return Err(Error::Numeric("no embeddings to accumulate".to_string()));
    }
    if top_n == 0 {
        return Err(Error::Numeric("top-N must be at least 1".to_string()));
    }
    for e in embeddings {
        if !e.is_normalized() {
            return Err(Error::Numeric(
                "embeddings must be normalized before accumulation".to_string(),
            ));
        }
    }
    let vocab = union_vocabulary(embeddings);
    let mut membership = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        let mut m = vec![false; vocab.len()];
        for w in e.vocab().words() {
            m[vocab.id(w).expect("union contains every source token")] = true;
        }
        membership.push(m);
    }

    let mut cells: BTreeMap<(u32, u32), (f64, u32)> = BTreeMap::new();
    let mut skipped = 0usize;
    for e in embeddings {
        // Map local row ids into the fused vocabulary once per source.
        let to_union: Vec<u32> = e
            .vocab()
            .words()
            .iter()
            .map(|w| vocab.id(w).unwrap() as u32)
            .collect();
        // Neighbor search per word is independent and runs in parallel;
        // the merge below stays sequential in row order so credit sums
        // accumulate identically regardless of thread count.
        let per_word: Vec<Option<Vec<(usize, f64)>>> = (0..e.len())
            .into_par_iter()
            .map(|v| credit(&top_k_ids(e, v, top_n)))
            .collect();
        for (v, credits) in per_word.into_iter().enumerate() {
            let Some(credits) = credits else {
                skipped += 1;
                continue;
            };
            let uq = to_union[v];
            for (j, cr) in credits {
                let cell = cells.entry((uq, to_union[j])).or_insert((0.0, 0));
                cell.0 += cr;
                cell.1 += 1;
            }
        }
    }
    Ok(ScoreAccumulator {
        vocab,
        cells,
        membership,
        lexicon_pairs: BTreeSet::new(),
        skipped_degenerate: skipped,
    })
}

/// Injects lexicon pairs: both directions gain credit 1.0 and one selection,
/// and the lexicon counts as one extra source for those pairs. Pairs with a
/// token outside the fused vocabulary are dropped; returns how many.
pub fn inject_lexicon(acc: &mut ScoreAccumulator, lexicon: &LexiconPairs) -> usize {
    let mut dropped = 0usize;
    for (a, b) in lexicon.iter() {
        let (Some(i), Some(j)) = (acc.vocab.id(a), acc.vocab.id(b)) else {
            dropped += 1;
            continue;
        };
        let (i, j) = (i as u32, j as u32);
        for key in [(i, j), (j, i)] {
            let cell = acc.cells.entry(key).or_insert((0.0, 0));
            cell.0 += 1.0;
            cell.1 += 1;
            acc.lexicon_pairs.insert(key);
        }
    }
    dropped
}

/// Per-word ranked lists of related words; the position of an entry is its
/// desired rank (1-based) during fine-tuning.
#[derive(Debug, Clone, Default)]
pub struct RankingLabelSet {
    vocab: Vocabulary,
    /// query id → (neighbor id, fused score), sorted by score descending,
    /// ties by neighbor row id.
    entries: BTreeMap<u32, Vec<(u32, f64)>>,
}

impl RankingLabelSet {
    /// Number of labeled words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of (word, neighbor) label entries.
    pub fn total_entries(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Mean labeled-list length over labeled words.
    pub fn mean_list_len(&self) -> f64 {
        if self.entries.is_empty() {
            0.0
        } else {
            self.total_entries() as f64 / self.entries.len() as f64
        }
    }

    /// Iterates `(word, [(neighbor, score)])` in vocabulary order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Vec<(&str, f64)>)> {
        self.entries.iter().map(move |(&q, list)| {
            let word = self.vocab.word(q as usize);
            let list = list
                .iter()
                .map(|&(j, s)| (self.vocab.word(j as usize), s))
                .collect();
            (word, list)
        })
    }

    /// Labeled list for one word, if present.
    pub fn get(&self, word: &str) -> Option<Vec<(&str, f64)>> {
        let q = self.vocab.id(word)? as u32;
        let list = self.entries.get(&q)?;
        Some(
            list.iter()
                .map(|&(j, s)| (self.vocab.word(j as usize), s))
                .collect(),
        )
    }

    /// Writes one record per labeled word:
    /// `word\tneighbor1:score1\tneighbor2:score2…`, scores with 9 decimals.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (word, list) in self.iter() {
            let mut line = String::from(word);
            for (neighbor, score) in list {
                line.push('\t');
                line.push_str(neighbor);
                line.push(':');
                line.push_str(&format!("{score:.9}"));
            }
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a label file, enforcing the descending-score invariant.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = Vocabulary::new();
        let mut entries: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        let intern = |vocab: &mut Vocabulary, token: &str| -> u32 {
            match vocab.id(token) {
                Some(id) => id as u32,
                None => vocab.push(token.to_string()).unwrap() as u32,
            }
        };
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let word = fields
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "missing word".to_string()))?;
            let q = intern(&mut vocab, word);
            if entries.contains_key(&q) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate record for `{word}`"),
                ));
            }
            let mut list: Vec<(u32, f64)> = Vec::new();
            let mut prev = f64::INFINITY;
            for field in fields {
                let (neighbor, score) = field.rsplit_once(':').ok_or_else(|| {
                    Error::parse(
                        path,
                        lineno,
                        format!("expected `neighbor:score`, got `{field}`"),
                    )
                })?;
                let score: f64 = score
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad score `{score}`")))?;
                if !score.is_finite() {
                    return Err(Error::parse(path, lineno, "non-finite score".to_string()));
                }
                if score > prev {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "scores are not in descending order".to_string(),
                    ));
                }
                prev = score;
                if neighbor == word {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("`{word}` lists itself as a neighbor"),
                    ));
                }
                list.push((intern(&mut vocab, neighbor), score));
            }
            if !list.is_empty() {
                entries.insert(q, list);
            }
        }
        Ok(RankingLabelSet { vocab, entries })
    }

    #[cfg(test)]
    pub(crate) fn from_raw(vocab: Vocabulary, entries: BTreeMap<u32, Vec<(u32, f64)>>) -> Self {
        RankingLabelSet { vocab, entries }
    }
}

/// Applies the support filter and presence normalization, producing final
/// ranked label lists: pairs selected by `min_support` or fewer sources are
/// dropped, surviving credit sums are divided by co-presence, and each
/// word's list is sorted by fused score (ties by row id) and truncated to
/// `cap` entries.
pub fn finalize(acc: ScoreAccumulator, min_support: u32, cap: usize) -> RankingLabelSet {
    let mut entries: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for (&(q, j), &(credit_sum, selected)) in &acc.cells {
        if selected <= min_support {
            continue;
        }
        let presence = acc.co_presence_ids(q, j);
        debug_assert!(presence >= 1, "selected pairs co-occur somewhere");
        let score = credit_sum / presence as f64;
        entries.entry(q).or_default().push((j, score));
    }
    for list in entries.values_mut() {
        list.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        list.truncate(cap);
    }
    entries.retain(|_, list| !list.is_empty());
    RankingLabelSet {
        vocab: acc.vocab,
        entries,
    }
}

/// Resolves the support filter for a given number of sources: with three or
/// more sources, pairs backed by two or fewer are dropped; with fewer
/// sources that would erase everything, so the filter drops to zero. Returns the value and
/// whether the caller should warn about the downgrade.
pub fn default_min_support(sources: usize) -> (u32, bool) {
    if sources >= 3 {
        (2, false)
    } else {
        (0, true)
    }
}
