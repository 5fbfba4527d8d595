//! Ranking knowledge items against a question, plus the "next best item not
//! yet used" query that drives retrieval rectification.

mod bm25;
mod bundle;
mod dense;
mod embed;
mod snapshot;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeItem, KnowledgeStore};
use crate::http::TransportError;

pub use bm25::{Bm25Index, Bm25Params};
pub use bundle::BundledRetriever;
pub use dense::{cosine, DenseIndex};
pub use embed::{CachedEmbedder, EmbedError, Embedder, HashingEmbedder, HttpEmbedder};
pub use snapshot::{IndexSnapshot, SNAPSHOT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("unknown item id `{0}`")]
    UnknownItem(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index has {items} items but {vectors} vectors")]
    VectorCount { items: usize, vectors: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

impl From<TransportError> for RetrievalError {
    fn from(e: TransportError) -> Self {
        Self::Embed(EmbedError::Transport(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    SparseBm25,
    DenseCosine,
}

impl RetrieverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SparseBm25 => "sparse_bm25",
            Self::DenseCosine => "dense_cosine",
        }
    }

    /// Sparse scoring treats a zero score as "no match"; dense scoring does not.
    pub fn has_zero_cutoff(self) -> bool {
        matches!(self, Self::SparseBm25)
    }
}

impl std::fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RetrieverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bm25" | "sparse" | "sparse_bm25" => Ok(Self::SparseBm25),
            "dense" | "dense_cosine" => Ok(Self::DenseCosine),
            other => Err(format!("unknown retriever `{other}` (expected bm25 or dense)")),
        }
    }
}

/// Item ids already used for one question. Only ever grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet {
    used: BTreeSet<String>,
}

impl ExclusionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item_id: impl Into<String>) {
        self.used.insert(item_id.into());
    }

    pub fn extend<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, ids: I) {
        self.used.extend(ids.into_iter().map(Into::into));
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.used.contains(item_id)
    }

    pub fn len(&self) -> usize {
        self.used.len()
    }

    pub fn is_empty(&self) -> bool {
        self.used.is_empty()
    }
}

/// A retrieved unit. `member_ids` lists the store items it was built from
/// (one for plain retrieval, several for bundles); all of them go into the
/// exclusion set once the hit is used.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub item: KnowledgeItem,
    pub score: f64,
    pub member_ids: Vec<String>,
}

pub trait Retriever: Send + Sync {
    fn kind(&self) -> RetrieverKind;

    fn store(&self) -> &KnowledgeStore;

    /// One relevance score per store item, in store order.
    fn score_all(&self, question: &str) -> Result<Vec<f64>, RetrievalError>;

    /// Highest-scoring item outside `exclusions`; ties go to the earlier item.
    fn retrieve_next(&self, question: &str, exclusions: &ExclusionSet) -> Result<Option<Hit>, RetrievalError> {
        let scores = self.score_all(question)?;
        Ok(best_unexcluded(self.store(), &scores, exclusions, self.kind().has_zero_cutoff()))
    }
}

pub(crate) fn best_unexcluded(
    store: &KnowledgeStore,
    scores: &[f64],
    exclusions: &ExclusionSet,
    zero_cutoff: bool,
) -> Option<Hit> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, (item, &score)) in store.items().iter().zip(scores).enumerate() {
        if exclusions.contains(&item.item_id) || (zero_cutoff && score <= 0.0) {
            continue;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((idx, score));
        }
    }
    best.map(|(idx, score)| {
        let item = store.items()[idx].clone();
        Hit { member_ids: vec![item.item_id.clone()], item, score }
    })
}
