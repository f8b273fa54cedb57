//! Subword alignment and sliding windows over long inputs.
//!
//! A word sequence is split into subword pieces, the pieces are cut into
//! overlapping windows of at most `max_len`, each window is scored on its own,
//! and the per-window probability rows are stitched back together: a position
//! seen by two windows gets the mean of its two rows. Word-level predictions
//! then read the row of each word's first piece.

mod vocab;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use vocab::{SubwordVocab, DEFAULT_UNK};

use crate::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid window configuration: max_len {max_len}, overlap {overlap}")]
    InvalidConfig { max_len: usize, overlap: usize },
    #[error("row {row} is not a probability distribution")]
    NotStochastic { row: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("malformed vocabulary: {0}")]
    MalformedVocab(String),
}

/// Subword pieces of a word sequence and the word each piece came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub subtokens: Vec<String>,
    pub word_index: Vec<usize>,
    pub is_first: Vec<bool>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.subtokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtokens.is_empty()
    }

    pub fn n_words(&self) -> usize {
        self.is_first.iter().filter(|&&f| f).count()
    }

    /// Subtoken position of each word's first piece.
    pub fn first_positions(&self) -> Vec<usize> {
        self.is_first
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }
}

/// Splits every word with the vocabulary and records where each piece came from.
pub fn align<S: AsRef<str>>(words: &[S], vocab: &SubwordVocab) -> Alignment {
    let mut out = Alignment {
        subtokens: Vec::new(),
        word_index: Vec::new(),
        is_first: Vec::new(),
    };
    for (w, word) in words.iter().enumerate() {
        for (k, piece) in vocab.tokenize_word(word.as_ref()).into_iter().enumerate() {
            out.subtokens.push(piece);
            out.word_index.push(w);
            out.is_first.push(k == 0);
        }
    }
    out
}

/// Window length and overlap in subtokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub max_len: usize,
    pub overlap: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            max_len: 512,
            overlap: 150,
        }
    }
}

impl WindowConfig {
    /// Requires `overlap < max_len` and a stride longer than half a window, so
    /// no position falls into more than two windows.
    pub fn new(max_len: usize, overlap: usize) -> Result<Self, WindowError> {
        let cfg = Self { max_len, overlap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        let ok = self.max_len >= 1 && self.overlap < self.max_len && 2 * self.stride() > self.max_len;
        if ok {
            Ok(())
        } else {
            Err(WindowError::InvalidConfig {
                max_len: self.max_len,
                overlap: self.overlap,
            })
        }
    }

    pub fn stride(&self) -> usize {
        self.max_len.saturating_sub(self.overlap)
    }
}

/// Left-aligned windows at multiples of the stride; the last one is clipped to
/// `n_subtokens`. Windows are emitted until one reaches the end.
pub fn make_windows(n_subtokens: usize, cfg: &WindowConfig) -> Vec<Range<usize>> {
    let stride = cfg.stride().max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n_subtokens {
        let end = (start + cfg.max_len).min(n_subtokens);
        out.push(start..end);
        if end == n_subtokens {
            break;
        }
        start += stride;
    }
    out
}

/// Per-subtoken probability rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbabilities {
    probs: Matrix,
}

const ROW_TOLERANCE: f64 = 1e-9;

impl TokenProbabilities {
    /// Checks that every row is non-negative and sums to 1 within 1e-9.
    pub fn new(probs: Matrix) -> Result<Self, WindowError> {
        for (i, row) in probs.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(WindowError::NotStochastic { row: i });
            }
        }
        Ok(Self { probs })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, WindowError> {
        let m = Matrix::from_rows(rows).ok_or_else(|| WindowError::ShapeMismatch("ragged rows".into()))?;
        Self::new(m)
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    pub fn n_tags(&self) -> usize {
        self.probs.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.probs
    }

    pub fn into_matrix(self) -> Matrix {
        self.probs
    }
}

/// Stitches per-window rows back into one sequence.
///
/// Windows are folded left to right: the running result is extended with the
/// new window, and positions shared with it are replaced by the mean of the
/// two rows.
pub fn merge_window_probs(
    windows: &[Range<usize>],
    per_window: &[TokenProbabilities],
) -> Result<TokenProbabilities, WindowError> {
    if windows.len() != per_window.len() {
        return Err(WindowError::ShapeMismatch(format!(
            "{} windows but {} probability blocks",
            windows.len(),
            per_window.len()
        )));
    }
    let Some(first) = per_window.first() else {
        return Err(WindowError::EmptyInput);
    };
    let n_tags = first.n_tags();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (w, (range, block)) in windows.iter().zip(per_window).enumerate() {
        if block.len() != range.len() || block.n_tags() != n_tags {
            return Err(WindowError::ShapeMismatch(format!(
                "window {w} covers {} positions but has {}x{} probabilities",
                range.len(),
                block.len(),
                block.n_tags()
            )));
        }
        if range.start > rows.len() {
            return Err(WindowError::ShapeMismatch(format!(
                "window {w} leaves a gap before {}",
                range.start
            )));
        }
        for (k, pos) in range.clone().enumerate() {
            let new_row = block.row(k);
            if pos < rows.len() {
                let merged = &mut rows[pos];
                for (m, &q) in merged.iter_mut().zip(new_row) {
                    *m = (*m + q) / 2.0;
                }
                let sum: f64 = merged.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    merged.iter_mut().for_each(|m| *m /= sum);
                }
            } else {
                rows.push(new_row.to_vec());
            }
        }
    }
    TokenProbabilities::from_rows(&rows)
}

/// Word-level rows: each word takes the row of its first subtoken.
pub fn word_probs(alignment: &Alignment, probs: &TokenProbabilities) -> Result<Vec<Vec<f64>>, WindowError> {
    if alignment.len() != probs.len() {
        return Err(WindowError::ShapeMismatch(format!(
            "alignment has {} subtokens, probabilities have {} rows",
            alignment.len(),
            probs.len()
        )));
    }
    Ok(alignment
        .first_positions()
        .into_iter()
        .map(|i| probs.row(i).to_vec())
        .collect())
}

/// Mean of sub-document class probabilities and its argmax (ties to class 0).
pub fn document_class_probs(per_subdoc: &[[f64; 2]]) -> Result<([f64; 2], usize), WindowError> {
    if per_subdoc.is_empty() {
        return Err(WindowError::EmptyInput);
    }
    for (i, p) in per_subdoc.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (p[0] + p[1] - 1.0).abs() > ROW_TOLERANCE {
            return Err(WindowError::NotStochastic { row: i });
        }
    }
    let n = per_subdoc.len() as f64;
    let mean = [
        per_subdoc.iter().map(|p| p[0]).sum::<f64>() / n,
        per_subdoc.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let label = crate::argmax(&mean).expect("two entries");
    Ok((mean, label))
}
