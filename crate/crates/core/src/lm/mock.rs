use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, Completion, CompletionRequest, ContinuationScore, LanguageModel, LmError};
use crate::prompt_digest;

/// Digest value that matches any prompt without a dedicated record.
pub const WILDCARD_DIGEST: &str = "*";

/// One line of a mock fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRecord {
    pub prompt_digest: String,
    pub attempt: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_token_logprobs: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_logprob: Option<f64>,
}

impl MockRecord {
    pub fn new(prompt: &str, attempt: u32, text: impl Into<String>) -> Self {
        Self::for_digest(prompt_digest(prompt), attempt, text)
    }

    pub fn for_digest(digest: impl Into<String>, attempt: u32, text: impl Into<String>) -> Self {
        Self { prompt_digest: digest.into(), attempt, text: text.into(), first_token_logprobs: None, sequence_logprob: None }
    }

    pub fn with_logprobs(mut self, logprobs: BTreeMap<String, f64>) -> Self {
        self.first_token_logprobs = Some(logprobs);
        self
    }

    pub fn with_sequence_logprob(mut self, logprob: f64) -> Self {
        self.sequence_logprob = Some(logprob);
        self
    }
}

/// Scripted backend keyed by (prompt digest, attempt index).
///
/// An attempt past the last scripted one reuses the highest scripted attempt
/// for that digest, so a single record answers every retry. Prompts without
/// records fall back to [`WILDCARD_DIGEST`] records, then fail with
/// [`LmError::MockMiss`]. Holds no mutable state.
#[derive(Debug, Clone, Default)]
pub struct MockLm {
    by_digest: HashMap<String, Vec<MockRecord>>,
}

impl MockLm {
    pub fn from_records(records: Vec<MockRecord>) -> Self {
        let mut by_digest: HashMap<String, Vec<MockRecord>> = HashMap::new();
        for r in records {
            by_digest.entry(r.prompt_digest.clone()).or_default().push(r);
        }
        for list in by_digest.values_mut() {
            // stable: a later duplicate of the same attempt never shadows the first
            list.sort_by_key(|r| r.attempt);
            list.dedup_by_key(|r| r.attempt);
        }
        Self { by_digest }
    }

    pub fn parse(content: &str) -> Result<Self, LmError> {
        let mut records = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: MockRecord =
                serde_json::from_str(line).map_err(|e| LmError::Fixture { line: i + 1, message: e.to_string() })?;
            if rec.sequence_logprob.is_some_and(|lp| lp > 0.0) {
                return Err(LmError::Fixture { line: i + 1, message: "sequence_logprob must be <= 0".into() });
            }
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let content = fs::read_to_string(path)
            .map_err(|e| LmError::Fixture { line: 0, message: format!("{}: {e}", path.display()) })?;
        Self::parse(&content)
    }

    fn records_for(&self, digest: &str) -> Option<&[MockRecord]> {
        self.by_digest
            .get(digest)
            .or_else(|| self.by_digest.get(WILDCARD_DIGEST))
            .map(Vec::as_slice)
    }

    fn lookup(&self, digest: &str, attempt: u32) -> Option<&MockRecord> {
        let list = self.records_for(digest)?;
        list.iter().rev().find(|r| r.attempt <= attempt).or_else(|| list.first())
    }
}

impl LanguageModel for MockLm {
    fn backend(&self) -> Backend {
        Backend::Mock
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LmError> {
        let digest = prompt_digest(req.prompt);
        let rec = self
            .lookup(&digest, req.attempt)
            .ok_or(LmError::MockMiss { digest, attempt: req.attempt })?;
        Ok(Completion {
            text: rec.text.clone(),
            first_token_logprobs: req.logprobs.and(rec.first_token_logprobs.clone()),
            sequence_logprob: rec.sequence_logprob,
        })
    }

    /// Finds a record for `prompt` whose trimmed text equals `continuation`
    /// and uses its scripted sequence log-probability; tokens are whitespace words.
    fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<ContinuationScore, LmError> {
        let digest = prompt_digest(prompt);
        let wanted = continuation.trim();
        let rec = self
            .records_for(&digest)
            .into_iter()
            .flatten()
            .find(|r| r.text.trim() == wanted && r.sequence_logprob.is_some())
            .ok_or(LmError::MockMiss { digest, attempt: 0 })?;
        Ok(ContinuationScore {
            logprob_sum: rec.sequence_logprob.unwrap_or_default(),
            tokens: wanted.split_whitespace().count().max(1),
        })
    }
}
