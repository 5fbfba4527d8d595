//! Knowledge sources and QA datasets: JSON-lines ingestion, text
//! normalization and triple verbalization.

mod dataset;
mod store;
mod tokenize;

use std::path::PathBuf;

pub use dataset::{load_dataset, parse_dataset, AnswerSet, QAExample};
pub use store::{
    load_corpus, parse_corpus, verbalize_triple, CorpusKind, KnowledgeItem, KnowledgeStore, Passage, SourceKind,
    Triple,
};
pub use tokenize::{contains_sequence, metric_tokens, tokenize, TokenizeMode};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: malformed JSON: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: field `{field}` {reason}")]
    Invalid { line: usize, field: &'static str, reason: String },
    #[error("line {line}: duplicate item id `{id}`")]
    DuplicateId { line: usize, id: String },
}

impl CorpusError {
    pub(crate) fn invalid(line: usize, field: &'static str, reason: impl Into<String>) -> Self {
        Self::Invalid { line, field, reason: reason.into() }
    }
}
