use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, TokenizeMode};
use crate::http::{HttpTransport, TransportError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("embedding endpoint returned {got} vectors for {expected} inputs")]
    Count { expected: usize, got: usize },
    #[error("embedding dimension {got} does not match earlier dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

pub trait Embedder: Send + Sync {
    /// Identifier recorded in index snapshots.
    fn name(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f32>,
}

/// `POST {"input": [...]}` → `{"data": [{"embedding": [...]}, ...]}` in input order.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    transport: HttpTransport,
}

impl HttpEmbedder {
    pub fn new(transport: HttpTransport) -> Self {
        Self { transport }
    }
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> String {
        format!("http:{}", self.transport.url())
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.transport.post_json(&EmbedRequest { input: texts })?;
        if resp.data.len() != texts.len() {
            return Err(EmbedError::Count { expected: texts.len(), got: resp.data.len() });
        }
        Ok(resp.data.into_iter().map(|d| d.embedding).collect())
    }
}

/// Deterministic offline embedder: signed feature hashing of retrieval-mode
/// tokens. Stands in for a real endpoint in tests and `--mock` runs.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dim];
        for tok in tokenize(text, TokenizeMode::Retrieval) {
            let h = Sha256::digest(tok.as_bytes());
            let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as usize % self.dim;
            let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn name(&self) -> String {
        format!("hashing:{}", self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Memoizes vectors by SHA-256 of the text and pins the dimension to the
/// first vector seen.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Mutex<HashMap<[u8; 32], Vec<f32>>>,
    dim: Mutex<Option<usize>>,
    calls: AtomicUsize,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()), dim: Mutex::new(None), calls: AtomicUsize::new(0) }
    }

    /// Number of batches forwarded to the wrapped embedder.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(self.embed_batch(&[text.to_owned()])?.pop().expect("one input, one output"))
    }

    fn key(text: &str) -> [u8; 32] {
        Sha256::digest(text.as_bytes()).into()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let keys: Vec<_> = texts.iter().map(|t| Self::key(t)).collect();
        let missing: Vec<String> = {
            let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .zip(&keys)
                .filter(|(_, k)| !cache.contains_key(*k) && seen.insert(**k))
                .map(|(t, _)| t.clone())
                .collect()
        };
        if !missing.is_empty() {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let vectors = self.inner.embed_batch(&missing)?;
            if vectors.len() != missing.len() {
                return Err(EmbedError::Count { expected: missing.len(), got: vectors.len() });
            }
            let mut dim = self.dim.lock().unwrap_or_else(|e| e.into_inner());
            for v in &vectors {
                match *dim {
                    None => *dim = Some(v.len()),
                    Some(d) if d != v.len() => return Err(EmbedError::Dimension { expected: d, got: v.len() }),
                    _ => {}
                }
            }
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            for (t, v) in missing.iter().zip(vectors) {
                cache.insert(Self::key(t), v);
            }
        }
        let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(keys.iter().map(|k| cache[k].clone()).collect())
    }
}
