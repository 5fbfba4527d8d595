//! Answer-quality and verifier-quality metrics computed from trace files.

mod answer;
mod metrics;
mod report;

pub use answer::{answer_acc, answer_em, answer_f1, is_correct, token_f1};
pub use metrics::{answer_metrics, evaluate, verifier_metrics, AnswerMetrics, EvalReport, GroupReport, Scores, VerifierMetrics};
pub use report::{answer_table, render_json, verifier_table};
