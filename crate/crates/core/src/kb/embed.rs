use thiserror::Error;

use crate::kb::summary::CaseSummary;
use crate::text::{fnv1a64, tokens};

pub const DEFAULT_DIMENSION: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedderError {
    #[error("embedder failed: {0}")]
    Failure(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Unit-norm embedding.
///
/// The stored form is the `f32` row written to `vectors.bin`; the `f64`
/// values used for similarity are that row renormalized, so a vector read
/// back from disk is identical to the one that was written.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector {
    raw: Vec<f32>,
    values: Vec<f64>,
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

impl EmbeddingVector {
    /// Normalize arbitrary finite values.
    pub fn from_values(values: &[f64]) -> Result<Self, EmbedderError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedderError::Failure("non-finite component".into()));
        }
        let norm = l2(values.iter().copied());
        if norm == 0.0 {
            return Err(EmbedderError::Failure("zero vector cannot be normalized".into()));
        }
        Self::from_raw(values.iter().map(|v| (v / norm) as f32).collect())
    }

    /// Rebuild from a stored `f32` row.
    pub fn from_raw(raw: Vec<f32>) -> Result<Self, EmbedderError> {
        let norm = l2(raw.iter().map(|&v| f64::from(v)));
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedderError::Failure("stored row has no direction".into()));
        }
        let values = raw.iter().map(|&v| f64::from(v) / norm).collect();
        Ok(EmbeddingVector { raw, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2(self.values.iter().copied())
    }

    /// Cosine similarity; both operands are unit vectors.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbedderError>;
}

/// Signed feature hashing over lowercase tokens.
#[derive(Clone, Copy, Debug)]
pub struct HashEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dimension: DEFAULT_DIMENSION, seed: 0 }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        HashEmbedder { dimension, seed: 0 }
    }

    /// Bucket and sign of one token.
    pub fn feature(&self, token: &str) -> (usize, f64) {
        let h = fnv1a64(token.as_bytes(), self.seed);
        let bucket = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (bucket, sign)
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbedderError> {
        if self.dimension == 0 {
            return Err(EmbedderError::Failure("dimension must be positive".into()));
        }
        let toks = tokens(text);
        if toks.is_empty() {
            return Err(EmbedderError::Failure("text has no tokens".into()));
        }
        let mut counts = vec![0.0_f64; self.dimension];
        for t in &toks {
            let (bucket, sign) = self.feature(t);
            counts[bucket] += sign;
        }
        EmbeddingVector::from_values(&counts)
    }
}

/// Embed a summary's rendered text, checking the output dimension.
pub fn embed(summary: &CaseSummary, embedder: &dyn Embedder) -> Result<EmbeddingVector, EmbedderError> {
    let v = embedder.embed_text(&summary.rendered)?;
    if v.dimension() != embedder.dimension() {
        return Err(EmbedderError::DimensionMismatch { expected: embedder.dimension(), actual: v.dimension() });
    }
    Ok(v)
}
