//! Per-question answering: the verify-and-rectify state machine and the
//! baselines it is compared against, all emitting full traces.

mod config;
mod runner;
mod script;
mod strategies;
mod strategy;
mod trace;
mod validate;

pub use config::{Mode, PipelineConfig};
pub use runner::{question_seed, run_dataset, run_question};
pub use script::MockScript;
pub use strategies::{AdaptiveConfidence, Augmenter, Kalmv, KnowledgeAugmented, Naive};
pub use strategy::{AnswerStrategy, Attempt, Outcome, Resources, RunContext, StrategyRegistry};
pub use trace::{
    parse_traces, read_traces, write_traces, Action, Disposition, GateCheck, GateKind, PipelineStep, PipelineTrace,
    TraceError, WithholdReason, TRACE_SCHEMA_VERSION,
};
pub use validate::validate_trace;

use crate::corpus::metric_tokens;
use crate::eval::token_f1;
use crate::lm::LmError;
use crate::retrieval::RetrievalError;
use crate::verifier::VerifierError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("mode needs a {0}, none configured")]
    MissingResource(&'static str),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("generation: {0}")]
    Lm(#[from] LmError),
    #[error("verification: {0}")]
    Verifier(#[from] VerifierError),
}

/// Token F1 of the answer against the knowledge text, as used by the
/// knowledge-F1 augmenter gate.
pub fn knowledge_f1(knowledge: &str, answer: &str) -> f64 {
    token_f1(&metric_tokens(answer), &metric_tokens(knowledge))
}
