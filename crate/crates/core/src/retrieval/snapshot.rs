use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Bm25Index, Bm25Params, DenseIndex, Embedder, RetrievalError, Retriever, RetrieverKind};
use crate::corpus::{KnowledgeItem, KnowledgeStore};

pub const SNAPSHOT_VERSION: u32 = 1;

/// On-disk form of an index. Sparse statistics are rebuilt from the stored
/// items on load; dense vectors are stored as computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSnapshot {
    pub version: u32,
    pub kind: RetrieverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25: Option<Bm25Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
    pub items: Vec<KnowledgeItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<f32>>>,
}

impl IndexSnapshot {
    pub fn sparse(index: &Bm25Index) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            kind: RetrieverKind::SparseBm25,
            bm25: Some(index.params()),
            embedder: None,
            items: index.store().items().to_vec(),
            vectors: None,
        }
    }

    pub fn dense(index: &DenseIndex) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            kind: RetrieverKind::DenseCosine,
            bm25: None,
            embedder: Some(index.embedder_name()),
            items: index.store().items().to_vec(),
            vectors: Some(index.vectors().to_vec()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).map_err(|e| RetrievalError::Snapshot(e.to_string()))?;
        fs::write(path, json).map_err(|e| RetrievalError::Snapshot(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|e| RetrievalError::Snapshot(format!("{}: {e}", path.display())))?;
        let snap: Self = serde_json::from_str(&text).map_err(|e| RetrievalError::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(RetrievalError::Snapshot(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap)
    }

    /// Rebuilds the live retriever. Dense snapshots need the embedder used
    /// for questions; a name differing from the one recorded is only logged,
    /// a dimension difference fails at query time.
    pub fn into_retriever(self, embedder: Option<Arc<dyn Embedder>>) -> Result<Box<dyn Retriever>, RetrievalError> {
        let store = KnowledgeStore::from_items(self.items)?;
        match self.kind {
            RetrieverKind::SparseBm25 => Ok(Box::new(Bm25Index::build(store, self.bm25.unwrap_or_default()))),
            RetrieverKind::DenseCosine => {
                let embedder = embedder
                    .ok_or_else(|| RetrievalError::Snapshot("dense snapshot needs an embedding endpoint".into()))?;
                if let Some(recorded) = &self.embedder {
                    if *recorded != embedder.name() {
                        log::warn!("snapshot was embedded with `{recorded}`, querying with `{}`", embedder.name());
                    }
                }
                let vectors = self.vectors.ok_or_else(|| RetrievalError::Snapshot("dense snapshot without vectors".into()))?;
                Ok(Box::new(DenseIndex::from_parts(store, vectors, embedder)?))
            }
        }
    }
}
