use super::{ExclusionSet, Hit, RetrievalError, Retriever, RetrieverKind};
use crate::corpus::{KnowledgeItem, KnowledgeStore};

/// Groups the next `size` unused items into one retrieval unit (joined by
/// spaces, id joined by `+`). Used for KGQA, where single triples are short.
pub struct BundledRetriever {
    inner: Box<dyn Retriever>,
    size: usize,
}

impl BundledRetriever {
    pub fn new(inner: Box<dyn Retriever>, size: usize) -> Self {
        Self { inner, size: size.max(1) }
    }
}

impl Retriever for BundledRetriever {
    fn kind(&self) -> RetrieverKind {
        self.inner.kind()
    }

    fn store(&self) -> &KnowledgeStore {
        self.inner.store()
    }

    fn score_all(&self, question: &str) -> Result<Vec<f64>, RetrievalError> {
        self.inner.score_all(question)
    }

    fn retrieve_next(&self, question: &str, exclusions: &ExclusionSet) -> Result<Option<Hit>, RetrievalError> {
        let mut local = exclusions.clone();
        let mut members = Vec::new();
        for _ in 0..self.size {
            match self.inner.retrieve_next(question, &local)? {
                Some(hit) => {
                    local.extend(hit.member_ids.iter().cloned());
                    members.push(hit);
                }
                None => break,
            }
        }
        let Some(first) = members.first() else { return Ok(None) };
        if members.len() == 1 {
            return Ok(members.pop());
        }
        let item = KnowledgeItem {
            item_id: members.iter().map(|h| h.item.item_id.as_str()).collect::<Vec<_>>().join("+"),
            source_kind: first.item.source_kind,
            title: None,
            text: members.iter().map(|h| h.item.text.as_str()).collect::<Vec<_>>().join(" "),
        };
        Ok(Some(Hit {
            score: first.score,
            member_ids: members.iter().flat_map(|h| h.member_ids.iter().cloned()).collect(),
            item,
        }))
    }
}
