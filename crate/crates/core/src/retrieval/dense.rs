use std::sync::Arc;

use super::{Embedder, RetrievalError, Retriever, RetrieverKind};
use crate::corpus::KnowledgeStore;

/// Cosine similarity computed in f64. A zero vector has similarity 0 with everything.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Exact full-scan cosine index.
pub struct DenseIndex {
    store: KnowledgeStore,
    vectors: Vec<Vec<f32>>,
    dim: usize,
    embedder: Arc<dyn Embedder>,
}

const BATCH: usize = 64;

impl DenseIndex {
    pub fn build(store: KnowledgeStore, embedder: Arc<dyn Embedder>) -> Result<Self, RetrievalError> {
        let mut vectors = Vec::with_capacity(store.len());
        let texts: Vec<String> = store.iter().map(|i| i.text.clone()).collect();
        for chunk in texts.chunks(BATCH) {
            vectors.extend(embedder.embed_batch(chunk)?);
        }
        Self::from_parts(store, vectors, embedder)
    }

    pub fn from_parts(
        store: KnowledgeStore,
        vectors: Vec<Vec<f32>>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, RetrievalError> {
        if vectors.len() != store.len() {
            return Err(RetrievalError::VectorCount { items: store.len(), vectors: vectors.len() });
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(RetrievalError::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Ok(Self { store, vectors, dim, embedder })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f32>] {
        &self.vectors
    }

    pub fn embedder_name(&self) -> String {
        self.embedder.name()
    }
}

impl Retriever for DenseIndex {
    fn kind(&self) -> RetrieverKind {
        RetrieverKind::DenseCosine
    }

    fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    fn score_all(&self, question: &str) -> Result<Vec<f64>, RetrievalError> {
        let q = self.embedder.embed_batch(&[question.to_owned()])?.pop().unwrap_or_default();
        if !self.vectors.is_empty() && q.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        Ok(self.vectors.iter().map(|v| cosine(&q, v)).collect())
    }
}
