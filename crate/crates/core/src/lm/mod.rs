//! Calling generation and verifier LMs behind one trait, with a live HTTP
//! backend and a deterministic fixture-driven mock.

mod http;
mod mock;
mod prompt;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::http::TransportError;
use crate::prompt_digest;

pub use http::{HttpLm, LmRequestBody, LmResponseBody};
pub use mock::{MockLm, MockRecord, WILDCARD_DIGEST};
pub use prompt::build_qa_prompt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("backend does not support {0}")]
    Capability(&'static str),
    #[error("mock fixture has no response for prompt digest {digest} (attempt {attempt})")]
    MockMiss { digest: String, attempt: u32 },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("invalid option list: {0}")]
    InvalidOptions(String),
    #[error("mock fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationParams {
    pub mode: DecodeMode,
    pub top_k: u32,
    pub temperature: f64,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub seed: u64,
}

impl GenerationParams {
    pub fn greedy() -> Self {
        Self { mode: DecodeMode::Greedy, top_k: 1, temperature: 1.0, max_new_tokens: 32, seed: 0 }
    }

    /// Re-sampling defaults: k = 40, temperature 0.7.
    pub fn top_k() -> Self {
        Self { mode: DecodeMode::TopK, top_k: 40, temperature: 0.7, max_new_tokens: 32, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LmError> {
        if self.top_k < 1 {
            return Err(LmError::InvalidParams("top_k must be >= 1".into()));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(LmError::InvalidParams("temperature must be > 0".into()));
        }
        if self.max_new_tokens < 1 {
            return Err(LmError::InvalidParams("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub sequence_logprob: Option<f64>,
    pub backend: Backend,
}

/// Wire-level request handed to a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_k: u32,
    /// Number of first-token alternatives wanted, if any.
    pub logprobs: Option<u32>,
    pub seed: u64,
    /// How many times this exact prompt was already sent in the current question run.
    pub attempt: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Completion {
    pub text: String,
    pub first_token_logprobs: Option<BTreeMap<String, f64>>,
    pub sequence_logprob: Option<f64>,
}

/// Summed log-probability of a continuation and its token count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationScore {
    pub logprob_sum: f64,
    pub tokens: usize,
}

pub trait LanguageModel: Send + Sync {
    fn backend(&self) -> Backend;

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LmError>;

    fn score_continuation(&self, _prompt: &str, _continuation: &str) -> Result<ContinuationScore, LmError> {
        Err(LmError::Capability("sequence scoring"))
    }
}

/// Per-question attempt counters keyed by prompt digest. Owned by one
/// question run and never shared.
#[derive(Debug, Clone, Default)]
pub struct Session {
    attempts: HashMap<String, u32>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_attempt(&mut self, digest: &str) -> u32 {
        let slot = self.attempts.entry(digest.to_owned()).or_insert(0);
        let current = *slot;
        *slot += 1;
        current
    }
}

/// Probability per option letter. Always normalized over exactly the
/// requested letters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionScores(pub BTreeMap<char, f64>);

impl OptionScores {
    pub fn get(&self, letter: char) -> f64 {
        self.0.get(&letter).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn uniform(options: &[char]) -> Self {
        let p = 1.0 / options.len() as f64;
        Self(options.iter().map(|&o| (o, p)).collect())
    }

    pub fn one_hot(options: &[char], chosen: char) -> Self {
        Self(options.iter().map(|&o| (o, if o == chosen { 1.0 } else { 0.0 })).collect())
    }

    /// Softmax of the given log-probabilities over `options`; options absent
    /// from `logprobs` get probability 0.
    pub fn from_logprobs(options: &[char], logprobs: &BTreeMap<char, f64>) -> Self {
        let max = logprobs.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> =
            options.iter().map(|o| logprobs.get(o).map_or(0.0, |lp| (lp - max).exp())).collect();
        let total: f64 = weights.iter().sum();
        Self(options.iter().zip(weights).map(|(&o, w)| (o, w / total)).collect())
    }
}

pub fn generate(
    lm: &dyn LanguageModel,
    session: &mut Session,
    prompt: &str,
    params: &GenerationParams,
) -> Result<GenerationResult, LmError> {
    params.validate()?;
    let attempt = session.next_attempt(&prompt_digest(prompt));
    let (top_k, seed) = match params.mode {
        DecodeMode::Greedy => (1, params.seed),
        DecodeMode::TopK => (params.top_k, params.seed.wrapping_add(u64::from(attempt))),
    };
    let completion = lm.complete(&CompletionRequest {
        prompt,
        max_tokens: params.max_new_tokens,
        temperature: params.temperature,
        top_k,
        logprobs: None,
        seed,
        attempt,
    })?;
    Ok(GenerationResult {
        text: completion.text.trim().to_owned(),
        sequence_logprob: completion.sequence_logprob,
        backend: lm.backend(),
    })
}

fn check_options(options: &[char]) -> Result<(), LmError> {
    if options.is_empty() {
        return Err(LmError::InvalidOptions("empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &o in options {
        if !o.is_ascii_alphabetic() {
            return Err(LmError::InvalidOptions(format!("`{o}` is not a letter")));
        }
        if !seen.insert(o) {
            return Err(LmError::InvalidOptions(format!("`{o}` repeated")));
        }
    }
    Ok(())
}

/// Probability of each option letter being the verifier's first output token.
///
/// Uses first-token log-probabilities when the backend returns them (token
/// text is whitespace-trimmed; the best-scoring variant of a letter wins).
/// Otherwise the greedy output's first character becomes a one-hot vote, and
/// an answer outside `options` yields a uniform distribution.
pub fn score_options(
    lm: &dyn LanguageModel,
    session: &mut Session,
    prompt: &str,
    options: &[char],
) -> Result<OptionScores, LmError> {
    check_options(options)?;
    let attempt = session.next_attempt(&prompt_digest(prompt));
    let completion = lm.complete(&CompletionRequest {
        prompt,
        max_tokens: 1,
        temperature: 1.0,
        top_k: 1,
        logprobs: Some((options.len() as u32).max(5)),
        seed: 0,
        attempt,
    })?;
    if let Some(table) = &completion.first_token_logprobs {
        let mut found: BTreeMap<char, f64> = BTreeMap::new();
        for (token, &lp) in table {
            let mut chars = token.trim().chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                if options.contains(&c) && !lp.is_nan() {
                    let slot = found.entry(c).or_insert(f64::NEG_INFINITY);
                    *slot = slot.max(lp);
                }
            }
        }
        if found.values().any(|lp| lp.is_finite()) {
            return Ok(OptionScores::from_logprobs(options, &found));
        }
    }
    match completion.text.trim().chars().next() {
        Some(c) if options.contains(&c) => Ok(OptionScores::one_hot(options, c)),
        _ => {
            log::warn!("verifier produced `{}`, not one of {options:?}; using uniform scores", completion.text.trim());
            Ok(OptionScores::uniform(options))
        }
    }
}

/// `exp(mean token log-probability)` of `answer` continuing `prompt`, in [0, 1].
pub fn answer_confidence(lm: &dyn LanguageModel, prompt: &str, answer: &str) -> Result<f64, LmError> {
    let s = lm.score_continuation(prompt, answer)?;
    let mean = s.logprob_sum / s.tokens.max(1) as f64;
    Ok(mean.exp().clamp(0.0, 1.0))
}
