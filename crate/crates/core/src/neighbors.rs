//! Exact cosine retrieval: top-k lists, full rank tables, and the
//! random-similarity threshold.
//!
//! Everything here is exact — no approximate nearest-neighbor structures —
//! because label quality feeds training directly. Ties are broken by
//! ascending row id everywhere, which makes ranks and losses deterministic.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Sequential dot product — the single similarity kernel.
///
/// The summation order is fixed (left to right) so brute-force oracles in
/// tests reproduce every cosine bit for bit, which keeps tie order stable
/// under the exact-equality retrieval contracts.
#[inline]
pub fn dot_seq(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match (a.as_slice(), b.as_slice()) {
        (Some(xs), Some(ys)) => {
            let mut acc = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                acc += x * y;
            }
            acc
        }
        _ => {
            let mut acc = 0.0;
            for i in 0..a.len() {
                acc += a[i] * b[i];
            }
            acc
        }
    }
}

/// Cosine of two rows of a normalized embedding (their dot product).
pub fn cosine_by_id(e: &Embedding, i: usize, j: usize) -> f64 {
    debug_assert!(e.is_normalized());
    dot_seq(e.row(i), e.row(j))
}

/// Cosine similarity between two tokens.
pub fn cosine(e: &Embedding, w1: &str, w2: &str) -> Result<f64> {
    let i = e.vocab().require(w1)?;
    let j = e.vocab().require(w2)?;
    Ok(cosine_by_id(e, i, j))
}

/// Cosines of `query` against every row (including its own slot).
pub fn cosines_for(e: &Embedding, query: usize) -> Vec<f64> {
    let q = e.row(query);
    (0..e.len()).map(|j| dot_seq(q, e.row(j))).collect()
}

/// Comparator for (row id, cosine) pairs: cosine descending, id ascending.
#[inline]
fn by_cosine_desc(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Top-k over a precomputed cosine slice, excluding the query slot.
/// Equals the sort-all-then-truncate oracle exactly, including tie order.
pub(crate) fn top_k_from_cosines(cos: &[f64], query: usize, k: usize) -> Vec<(usize, f64)> {
    let mut entries: Vec<(usize, f64)> = (0..cos.len())
        .filter(|&j| j != query)
        .map(|j| (j, cos[j]))
        .collect();
    let k = k.min(entries.len());
    if k == 0 {
        return Vec::new();
    }
    if k < entries.len() {
        entries.select_nth_unstable_by(k - 1, by_cosine_desc);
        entries.truncate(k);
    }
    entries.sort_unstable_by(by_cosine_desc);
    entries
}

/// Top-k nearest rows for a query row id.
pub fn top_k_ids(e: &Embedding, query: usize, k: usize) -> Vec<(usize, f64)> {
    top_k_from_cosines(&cosines_for(e, query), query, k)
}

/// Ordered neighbor list for a query token.
#[derive(Debug, Clone)]
pub struct NeighborList {
    pub query: String,
    /// `(token, cosine)` sorted by cosine descending, ties by row id.
    pub entries: Vec<(String, f64)>,
}

/// Top-k nearest words for a query token.
pub fn top_k(e: &Embedding, query: &str, k: usize) -> Result<NeighborList> {
    let id = e.vocab().require(query)?;
    let entries = top_k_ids(e, id, k)
        .into_iter()
        .map(|(j, c)| (e.vocab().word(j).to_string(), c))
        .collect();
    Ok(NeighborList {
        query: query.to_string(),
        entries,
    })
}

/// Full similarity ranking of the vocabulary relative to one query row.
#[derive(Debug, Clone)]
pub struct RankTable {
    query: usize,
    /// 1-based rank per row id; the query's own slot holds 0.
    positions: Vec<usize>,
    /// Row ids in rank order (cosine descending, ties by id).
    order: Vec<usize>,
    /// Cosines aligned with `order` — the descending similarity profile.
    sorted_cosines: Vec<f64>,
}

impl RankTable {
    pub fn query(&self) -> usize {
        self.query
    }

    /// Rank of a row id (1-based); the query itself has no rank.
    pub fn position(&self, id: usize) -> Option<usize> {
        match self.positions[id] {
            0 => None,
            p => Some(p),
        }
    }

    /// Row ids in rank order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Descending cosine values aligned with [`RankTable::order`].
    pub fn sorted_cosines(&self) -> &[f64] {
        &self.sorted_cosines
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Builds a rank table from a precomputed cosine slice.
pub(crate) fn rank_from_cosines(cos: &[f64], query: usize) -> RankTable {
    let mut entries: Vec<(usize, f64)> = (0..cos.len())
        .filter(|&j| j != query)
        .map(|j| (j, cos[j]))
        .collect();
    entries.sort_unstable_by(by_cosine_desc);
    let mut positions = vec![0usize; cos.len()];
    let mut order = Vec::with_capacity(entries.len());
    let mut sorted_cosines = Vec::with_capacity(entries.len());
    for (rank0, (j, c)) in entries.into_iter().enumerate() {
        positions[j] = rank0 + 1;
        order.push(j);
        sorted_cosines.push(c);
    }
    RankTable {
        query,
        positions,
        order,
        sorted_cosines,
    }
}

/// Full ranking of all non-query rows for one query row.
pub fn rank_table(e: &Embedding, query: usize) -> RankTable {
    rank_from_cosines(&cosines_for(e, query), query)
}

/// Random-similarity threshold δ.
///
/// Draws a `sample_size × dim` matrix with entries i.i.d. uniform on
/// [−1, 1), row-normalizes it, computes each row's mean over its top-5
/// cosines to the other rows, and returns the grand mean. Deterministic for
/// a fixed seed; cosines above δ are unlikely to arise by chance and are
/// treated as meaningful similarity.
pub fn random_threshold(dim: usize, sample_size: usize, seed: u64) -> Result<f64> {
    if dim < 1 {
        return Err(Error::Numeric("threshold requires dim >= 1".to_string()));
    }
    if sample_size <= 5 {
        return Err(Error::Numeric(
            "threshold sample must exceed 5 rows (top-5 undefined)".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::<f64>::zeros((sample_size, dim));
    for r in 0..sample_size {
        loop {
            let mut norm_sq = 0.0;
            for c in 0..dim {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(r, c)] = v;
                norm_sq += v * v;
            }
            // Resample on the (measure-zero) all-zero draw.
            if norm_sq > 0.0 {
                let norm = norm_sq.sqrt();
                for c in 0..dim {
                    m[(r, c)] /= norm;
                }
                break;
            }
        }
    }
    // Per-row top-5 means are independent, so this parallel map is
    // deterministic regardless of thread count; the grand mean is reduced
    // sequentially afterwards.
    let row_means: Vec<f64> = (0..sample_size)
        .into_par_iter()
        .map(|r| {
            let q = m.row(r);
            let mut best = [f64::NEG_INFINITY; 5];
            for j in 0..sample_size {
                if j == r {
                    continue;
                }
                let c = dot_seq(q, m.row(j));
                if c > best[4] {
                    let mut i = 4;
                    while i > 0 && c > best[i - 1] {
                        best[i] = best[i - 1];
                        i -= 1;
                    }
                    best[i] = c;
                }
            }
            best.iter().sum::<f64>() / 5.0
        })
        .collect();
    Ok(row_means.iter().sum::<f64>() / sample_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Vocabulary;

    fn toy(rows: &[&[f64]]) -> Embedding {
        let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::from_words(words).unwrap();
        let dim = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let matrix = Array2::from_shape_vec((rows.len(), dim), flat).unwrap();
        Embedding::from_parts(vocab, matrix)
            .unwrap()
            .normalize_rows()
            .unwrap()
    }

    #[test]
    fn cosine_of_identical_rows_is_one() {
        let e = toy(&[&[0.3, 0.4], &[0.3, 0.4]]);
        assert!((cosine(&e, "w0", "w1").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_rows_is_zero() {
        let e = toy(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cosine(&e, "w0", "w1").unwrap(), 0.0);
    }

    #[test]
    fn cosine_is_symmetric() {
        let e = toy(&[&[0.2, 0.9], &[-0.4, 0.1]]);
        assert_eq!(
            cosine(&e, "w0", "w1").unwrap(),
            cosine(&e, "w1", "w0").unwrap()
        );
    }

    #[test]
    fn unknown_token_errors_name_the_token() {
        let e = toy(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let err = cosine(&e, "w0", "nope").unwrap_err();
        assert!(err.to_string().contains("`nope`"), "{err}");
    }

    #[test]
    fn top_k_zero_is_empty() {
        let e = toy(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(top_k(&e, "w0", 0).unwrap().entries.is_empty());
    }

    #[test]
    fn top_k_matches_brute_force_truncation() {
        let e = toy(&[&[1.0, 0.0], &[0.9, 0.1], &[0.0, 1.0], &[-0.5, 0.5]]);
        let cos = cosines_for(&e, 0);
        let mut all: Vec<(usize, f64)> = (1..4).map(|j| (j, cos[j])).collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(2);
        assert_eq!(top_k_ids(&e, 0, 2), all);
    }

    #[test]
    fn top_k_saturates_at_vocab_size() {
        let e = toy(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(top_k(&e, "w0", 100).unwrap().entries.len(), 2);
    }

    #[test]
    fn rank_table_positions_follow_cosines() {
        // From w0: cos(w1) ≈ 0.9 area, cos(w2) small.
        let e = toy(&[&[1.0, 0.0], &[0.9, 0.1], &[0.1, 0.9]]);
        let t = rank_table(&e, 0);
        assert_eq!(t.position(1), Some(1));
        assert_eq!(t.position(2), Some(2));
        assert_eq!(t.position(0), None);
        assert_eq!(t.order(), &[1, 2]);
    }

    #[test]
    fn identical_vectors_rank_by_row_id() {
        let e = toy(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let t = rank_table(&e, 2);
        assert_eq!(t.order(), &[0, 1, 3]);
        assert_eq!(t.position(0), Some(1));
        assert_eq!(t.position(3), Some(3));
    }

    #[test]
    fn top_k_is_a_prefix_of_rank_table_order() {
        let e = toy(&[
            &[0.3, 0.7],
            &[0.5, 0.5],
            &[-0.2, 0.4],
            &[0.9, -0.1],
            &[0.0, 1.0],
        ]);
        let t = rank_table(&e, 1);
        let top = top_k_ids(&e, 1, 3);
        let ids: Vec<usize> = top.iter().map(|&(j, _)| j).collect();
        assert_eq!(&ids, &t.order()[..3]);
        for (i, &(_, c)) in top.iter().enumerate() {
            assert_eq!(c.to_bits(), t.sorted_cosines()[i].to_bits());
        }
    }

    #[test]
    fn threshold_dim_one_is_exactly_one() {
        // Every normalized 1-d row is ±1; with hundreds of rows each row has
        // at least five same-sign peers, so all top-5 cosines equal 1.
        let delta = random_threshold(1, 400, 11).unwrap();
        assert_eq!(delta, 1.0);
    }

    #[test]
    fn threshold_is_deterministic_for_fixed_inputs() {
        let a = random_threshold(8, 64, 42).unwrap();
        let b = random_threshold(8, 64, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = random_threshold(8, 64, 43).unwrap();
        assert_ne!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn threshold_rejects_tiny_samples() {
        assert!(random_threshold(8, 5, 1).is_err());
        assert!(random_threshold(8, 6, 1).is_ok());
    }

    #[test]
    fn threshold_lies_in_unit_interval() {
        for dim in [2usize, 10, 50] {
            let d = random_threshold(dim, 128, 7).unwrap();
            assert!(d > 0.0 && d <= 1.0, "dim={dim} delta={d}");
        }
    }
}
