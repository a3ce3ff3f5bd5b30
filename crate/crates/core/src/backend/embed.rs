use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::text::{fnv1a64, tokenize};

/// Dense embedding; all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::InvalidRequest("embedding must be non-empty and finite".into()));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; 0 when either vector is zero or dimensions differ.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.dim() != b.dim() {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError>;
    fn dim(&self) -> usize;
}

/// Offline embedder: each token maps to a pseudo-random direction seeded by
/// its hash and the text vector is the normalised sum. Identical texts give
/// identical vectors, and texts sharing words are similar.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, 0)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim, seed }
    }

    fn direction(&self, key: &str, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(key.as_bytes()) ^ self.seed);
        for v in out.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("cannot embed empty text".into()));
        }
        let mut acc = vec![0.0; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            self.direction(text, &mut acc);
        }
        for token in &tokens {
            self.direction(token, &mut acc);
        }
        let mut norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            acc[0] = 1.0;
            norm = 1.0;
        }
        acc.iter_mut().for_each(|v| *v /= norm);
        EmbeddingVector::new(acc)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
