use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::corpus::AnswerSet;
use crate::verifier::VerdictDistribution;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Deliver,
    Reretrieve,
    Regenerate,
    Withhold,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Answered,
    Withheld,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithholdReason {
    BudgetExhausted,
    KnowledgeExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Confidence,
    KnowledgeF1,
}

/// Heuristic accept/reject check used by the baselines in place of a verifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub kind: GateKind,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStep {
    pub step_index: u32,
    pub knowledge_item_id: Option<String>,
    pub knowledge_text: Option<String>,
    pub prompt_digest: String,
    pub generated_answer: String,
    pub verdict: Option<VerdictDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateCheck>,
    pub action_taken: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub schema_version: u32,
    pub example_id: String,
    pub question: String,
    pub answers: AnswerSet,
    pub mode: Mode,
    pub max_rectify_steps: u32,
    pub steps: Vec<PipelineStep>,
    pub disposition: Disposition,
    pub final_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withhold_reason: Option<WithholdReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PipelineTrace {
    pub fn last_step(&self) -> Option<&PipelineStep> {
        self.steps.last()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace line {line}: schema version {found} is not supported (expected {TRACE_SCHEMA_VERSION})")]
    SchemaVersion { line: usize, found: u64 },
}

pub fn parse_traces(content: &str) -> Result<Vec<PipelineTrace>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })?;
        let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0);
        if found != u64::from(TRACE_SCHEMA_VERSION) {
            return Err(TraceError::SchemaVersion { line: line_no, found });
        }
        out.push(serde_json::from_value(value).map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn read_traces(path: &Path) -> Result<Vec<PipelineTrace>, TraceError> {
    let content =
        fs::read_to_string(path).map_err(|e| TraceError::Io { path: path.display().to_string(), source: e })?;
    parse_traces(&content)
}

pub fn write_traces(path: &Path, traces: &[PipelineTrace]) -> Result<(), TraceError> {
    let io = |e| TraceError::Io { path: path.display().to_string(), source: e };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for t in traces {
        writeln!(w, "{}", t.to_json_line()).map_err(io)?;
    }
    w.flush().map_err(io)
}
