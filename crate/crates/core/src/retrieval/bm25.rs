use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{RetrievalError, Retriever, RetrieverKind};
use crate::corpus::{tokenize, KnowledgeStore, TokenizeMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Okapi BM25 over retrieval-mode tokens with the non-negative IDF
/// `ln(1 + (N - df + 0.5) / (df + 0.5))`. Repeated query terms contribute once
/// per occurrence.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    store: KnowledgeStore,
    params: Bm25Params,
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<u32>,
    avg_len: f64,
    postings: HashMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build(store: KnowledgeStore, params: Bm25Params) -> Self {
        let mut term_freqs = Vec::with_capacity(store.len());
        let mut doc_lens = Vec::with_capacity(store.len());
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (doc, item) in store.iter().enumerate() {
            let tokens = tokenize(&item.text, TokenizeMode::Retrieval);
            doc_lens.push(tokens.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            // sorted so postings are built in a reproducible order
            let mut terms: Vec<_> = tf.iter().collect();
            terms.sort();
            for (term, &count) in terms {
                postings.entry(term.clone()).or_default().push((doc as u32, count));
            }
            term_freqs.push(tf);
        }
        let total: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        let avg_len = if doc_lens.is_empty() { 0.0 } else { total as f64 / doc_lens.len() as f64 };
        Self { store, params, term_freqs, doc_lens, avg_len, postings }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.store.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = 1.0 - b + b * f64::from(self.doc_lens[doc]) / self.avg_len;
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    pub fn bm25_score(&self, query_tokens: &[String], item_id: &str) -> Result<f64, RetrievalError> {
        let doc = self.store.position(item_id).ok_or_else(|| RetrievalError::UnknownItem(item_id.to_owned()))?;
        let tf = &self.term_freqs[doc];
        Ok(query_tokens
            .iter()
            .filter_map(|q| tf.get(q).map(|&c| self.idf(q) * self.term_weight(c, doc)))
            .sum())
    }

    pub fn score_tokens(&self, query_tokens: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.store.len()];
        for q in query_tokens {
            let Some(list) = self.postings.get(q) else { continue };
            let idf = self.idf(q);
            for &(doc, tf) in list {
                scores[doc as usize] += idf * self.term_weight(tf, doc as usize);
            }
        }
        scores
    }
}

impl Retriever for Bm25Index {
    fn kind(&self) -> RetrieverKind {
        RetrieverKind::SparseBm25
    }

    fn store(&self) -> &KnowledgeStore {
        &self.store
    }

    fn score_all(&self, question: &str) -> Result<Vec<f64>, RetrievalError> {
        Ok(self.score_tokens(&tokenize(question, TokenizeMode::Retrieval)))
    }
}
