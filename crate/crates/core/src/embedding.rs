//! Deterministic hashed character-trigram embeddings.
//!
//! Each whitespace token of the normalized text contributes its character
//! trigrams (a token shorter than three characters contributes itself), so
//! `<*>` is a trigram of its own. Trigrams are hashed into `dim` buckets,
//! counted, and the count vector is L2-normalized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{norm, stable_hash, HASH_SEED};

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        Self::from_stored(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

impl EmbeddingVector {
    /// Builds a unit vector from raw bucket counts.
    pub fn from_counts(counts: Vec<f64>) -> Result<Self, EmbeddingError> {
        let n = l2(&counts);
        if n == 0.0 {
            return Err(EmbeddingError::ZeroVector);
        }
        let values: Vec<f64> = counts.into_iter().map(|c| c / n).collect();
        let norm = l2(&values);
        Ok(Self { values, norm })
    }

    /// Wraps stored values verbatim (used when loading persisted vectors).
    pub fn from_stored(values: Vec<f64>) -> Self {
        let norm = l2(&values);
        Self { values, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Character trigrams of each token of `norm(text)`, in order.
pub fn trigrams(text: &str) -> Vec<String> {
    let mut grams = Vec::new();
    for token in norm(text).split(' ').filter(|t| !t.is_empty()) {
        let chars: Vec<char> = token.chars().collect();
        if chars.len() < 3 {
            grams.push(token.to_string());
        } else {
            grams.extend(chars.windows(3).map(|w| w.iter().collect::<String>()));
        }
    }
    grams
}

/// Unnormalized trigram bucket counts.
pub fn bucket_counts(text: &str, dim: usize) -> Vec<f64> {
    let mut counts = vec![0.0; dim];
    for gram in trigrams(text) {
        let bucket = (stable_hash(gram.as_bytes(), HASH_SEED) % dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    counts
}

/// Embedder with a fixed dimension for the lifetime of a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedder {
    dim: usize,
}

impl Default for Embedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl Embedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if norm(text).is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        EmbeddingVector::from_counts(bucket_counts(text, self.dim))
    }
}

/// Convenience wrapper using the default dimension.
pub fn embed(text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    Embedder::default().embed(text)
}

pub fn cosine_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
