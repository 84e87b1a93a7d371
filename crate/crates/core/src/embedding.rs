//! Embedding matrices: loading, validation, normalization, persistence.
//!
//! An [`Embedding`] is a vocabulary plus a dense row-per-word matrix. Two
//! text formats are supported: `glove-text` (`token v1 … vd` per line, no
//! header) and `word2vec-text` (a `count dim` header line followed by the
//! same rows). Tokens are opaque byte strings — there is no case folding
//! unless [`Embedding::fold_lowercase`] is explicitly requested, because
//! folding silently merges distinct published vectors.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Token table with a reverse index; row ids are contiguous from zero.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from tokens in order; duplicates are an error.
    pub fn from_words<I>(words: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for word in words {
            let word = word.into();
            if vocab.push(word.clone()).is_none() {
                return Err(Error::DuplicateToken(word));
            }
        }
        Ok(vocab)
    }

    /// Appends a token, returning its new row id, or `None` if it already
    /// exists.
    pub fn push(&mut self, word: String) -> Option<usize> {
        if self.index.contains_key(&word) {
            return None;
        }
        let id = self.words.len();
        self.index.insert(word.clone(), id);
        self.words.push(word);
        Some(id)
    }

    /// Row id for a token if present.
    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Row id for a token, or an [`Error::UnknownToken`].
    pub fn require(&self, token: &str) -> Result<usize> {
        self.id(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Token for a row id. Panics on out-of-range ids (internal misuse).
    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Dense row-per-word matrix plus its vocabulary.
#[derive(Debug, Clone)]
pub struct Embedding {
    vocab: Vocabulary,
    matrix: Array2<f64>,
    normalized: bool,
}

impl Embedding {
    /// Assembles an embedding, checking shape agreement and finiteness.
    pub fn from_parts(vocab: Vocabulary, matrix: Array2<f64>) -> Result<Self> {
        if vocab.len() != matrix.nrows() {
            return Err(Error::Numeric(format!(
                "vocabulary has {} tokens but matrix has {} rows",
                vocab.len(),
                matrix.nrows()
            )));
        }
        if matrix.ncols() == 0 || matrix.nrows() == 0 {
            return Err(Error::Numeric("empty embedding".to_string()));
        }
        for (i, row) in matrix.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite value in vector for token `{}`",
                    vocab.word(i)
                )));
            }
        }
        Ok(Embedding {
            vocab,
            matrix,
            normalized: false,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Vector dimensionality d.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Vocabulary size |V|.
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, id: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(id)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Overwrites one row. Callers maintain the normalization invariant.
    pub(crate) fn set_row(&mut self, id: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.dim());
        self.matrix
            .row_mut(id)
            .iter_mut()
            .zip(values)
            .for_each(|(dst, src)| *dst = *src);
    }

    /// Scales every row to unit L2 norm, preserving direction.
    pub fn normalize_rows(mut self) -> Result<Self> {
        let n = self.len();
        for i in 0..n {
            let norm = self.matrix.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector(self.vocab.word(i).to_string()));
            }
            self.matrix.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        }
        self.normalized = true;
        Ok(self)
    }

    /// Lowercases every token, keeping the first occurrence of each folded
    /// form and dropping the rest. Returns the new embedding and how many
    /// rows were dropped. Normalization state is preserved.
    pub fn fold_lowercase(self) -> (Self, usize) {
        let mut vocab = Vocabulary::new();
        let mut keep = Vec::new();
        for (i, word) in self.vocab.words.iter().enumerate() {
            if vocab.push(word.to_lowercase()).is_some() {
                keep.push(i);
            }
        }
        let dropped = self.len() - keep.len();
        let mut matrix = Array2::zeros((keep.len(), self.dim()));
        for (new_id, &old_id) in keep.iter().enumerate() {
            matrix.row_mut(new_id).assign(&self.matrix.row(old_id));
        }
        (
            Embedding {
                vocab,
                matrix,
                normalized: self.normalized,
            },
            dropped,
        )
    }
}

/// Text serialization formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    /// `token v1 … vd` per line, no header.
    GloveText,
    /// First line `count dim`, then the same rows.
    Word2vecText,
}

impl fmt::Display for TextFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextFormat::GloveText => write!(f, "glove-text"),
            TextFormat::Word2vecText => write!(f, "word2vec-text"),
        }
    }
}

/// Heuristic used when no explicit format is given: a first line made of
/// exactly two integer fields is read as a word2vec header.
fn looks_like_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Applies the header heuristic to a file without loading it, so callers
/// can round-trip an embedding in the format it arrived in.
pub fn detect_format(path: &Path) -> Result<TextFormat> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        return Ok(if looks_like_header(&line) {
            TextFormat::Word2vecText
        } else {
            TextFormat::GloveText
        });
    }
    Err(Error::parse(path, 1, "empty embedding".to_string()))
}

/// Loads a text embedding. When `format` is `None` it is inferred from the
/// presence of a numeric header line.
pub fn load_embedding(path: &Path, format: Option<TextFormat>) -> Result<Embedding> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut vocab = Vocabulary::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut declared: Option<(usize, usize)> = None;

    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if first {
            first = false;
            let header = match format {
                Some(TextFormat::Word2vecText) => true,
                Some(TextFormat::GloveText) => false,
                None => looks_like_header(&line),
            };
            if header {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected header `count dim`".to_string(),
                    ));
                }
                let count = fields[0].parse::<usize>().map_err(|_| {
                    Error::parse(path, lineno, format!("bad vector count `{}`", fields[0]))
                })?;
                let d = fields[1].parse::<usize>().map_err(|_| {
                    Error::parse(path, lineno, format!("bad dimension `{}`", fields[1]))
                })?;
                declared = Some((count, d));
                continue;
            }
        }
        parse_vector_line(path, lineno, &line, &mut vocab, &mut values, &mut dim)?;
    }

    let dim = dim.ok_or_else(|| Error::parse(path, 1, "empty embedding".to_string()))?;
    if let Some((count, d)) = declared {
        if d != dim {
            return Err(Error::parse(
                path,
                1,
                format!("header declares dimension {d} but rows have {dim}"),
            ));
        }
        if count != vocab.len() {
            return Err(Error::parse(
                path,
                1,
                format!(
                    "header declares {count} vectors but file has {}",
                    vocab.len()
                ),
            ));
        }
    }
    let rows = vocab.len();
    let matrix =
        Array2::from_shape_vec((rows, dim), values).expect("row-major buffer matches (rows, dim)");
    Embedding::from_parts(vocab, matrix)
}

fn parse_vector_line(
    path: &Path,
    lineno: usize,
    line: &str,
    vocab: &mut Vocabulary,
    values: &mut Vec<f64>,
    dim: &mut Option<usize>,
) -> Result<()> {
    let mut fields = line.split_whitespace();
    let token = fields
        .next()
        .ok_or_else(|| Error::parse(path, lineno, "missing token".to_string()))?;
    let mut count = 0usize;
    for field in fields {
        let v = field
            .parse::<f64>()
            .map_err(|_| Error::parse(path, lineno, format!("bad number `{field}`")))?;
        if !v.is_finite() {
            return Err(Error::parse(
                path,
                lineno,
                format!("non-finite value `{field}`"),
            ));
        }
        values.push(v);
        count += 1;
    }
    match *dim {
        None => {
            if count == 0 {
                return Err(Error::parse(
                    path,
                    lineno,
                    "vector has no values".to_string(),
                ));
            }
            *dim = Some(count);
        }
        Some(d) if d != count => {
            return Err(Error::parse(
                path,
                lineno,
                format!("vector has {count} values, expected {d}"),
            ));
        }
        _ => {}
    }
    if vocab.push(token.to_string()).is_none() {
        return Err(Error::parse(
            path,
            lineno,
            format!("duplicate token `{token}`"),
        ));
    }
    Ok(())
}

/// Writes an embedding as text. Values are printed with six decimal places,
/// so a save/load round trip reproduces entries to 1e-6.
pub fn save_embedding(e: &Embedding, path: &Path, format: TextFormat) -> Result<()> {
    if e.is_empty() {
        return Err(Error::Numeric(
            "refusing to save an empty embedding".to_string(),
        ));
    }
    let file = File::create(path).map_err(|err| Error::io(path, err))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, s: String| -> Result<()> {
        out.write_all(s.as_bytes())
            .map_err(|err| Error::io(path, err))
    };
    if format == TextFormat::Word2vecText {
        write(&mut out, format!("{} {}\n", e.len(), e.dim()))?;
    }
    for i in 0..e.len() {
        let mut line = String::with_capacity(16 * (e.dim() + 1));
        line.push_str(e.vocab().word(i));
        for v in e.row(i).iter() {
            line.push(' ');
            line.push_str(&format!("{v:.6}"));
        }
        line.push('\n');
        write(&mut out, line)?;
    }
    out.flush().map_err(|err| Error::io(path, err))
}

/// Union of all vocabularies, tokens in first-appearance order.
pub fn union_vocabulary(embeddings: &[Embedding]) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    for e in embeddings {
        for word in e.vocab().words() {
            vocab.push(word.clone());
        }
    }
    vocab
}

/// Number of embeddings whose vocabulary contains both tokens.
pub fn pair_presence_count(embeddings: &[Embedding], w1: &str, w2: &str) -> usize {
    embeddings
        .iter()
        .filter(|e| e.vocab().contains(w1) && e.vocab().contains(w2))
        .count()
}
