//! Automatic verifier labels from gold answers, and the instruction-tuning
//! records built from them.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{contains_sequence, metric_tokens, AnswerSet, QAExample};
use crate::eval::is_correct;
use crate::verifier::{render_instruction, Verdict, VerifierError, TEMPLATE_IDS};

/// How an incorrect answer grounded in helpful knowledge is labeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// B whenever the knowledge holds a gold answer but the generated answer is wrong.
    #[default]
    Accuracy,
    /// B only when the generated answer shares no token with the knowledge;
    /// every other non-A, non-correct case is C.
    TokenOverlap,
}

impl LabelRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accuracy => "accuracy",
            Self::TokenOverlap => "token_overlap",
        }
    }
}

impl std::str::FromStr for LabelRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Self::Accuracy),
            "token_overlap" => Ok(Self::TokenOverlap),
            other => Err(format!("unknown label rule `{other}` (expected accuracy or token_overlap)")),
        }
    }
}

/// True when a normalized gold answer or alias occurs as a contiguous token
/// run in the normalized knowledge text.
pub fn answer_in_knowledge(answers: &AnswerSet, knowledge_text: &str) -> bool {
    let knowledge = metric_tokens(knowledge_text);
    answers.surface_forms().any(|g| contains_sequence(&knowledge, &metric_tokens(g)))
}

fn shares_token(answer: &str, knowledge_text: &str) -> bool {
    let knowledge: HashSet<String> = metric_tokens(knowledge_text).into_iter().collect();
    metric_tokens(answer).iter().any(|t| knowledge.contains(t))
}

/// A when the knowledge lacks every gold answer, else C when the generated
/// answer is correct, else B (subject to `rule`).
pub fn auto_label(answers: &AnswerSet, knowledge_text: &str, generated_answer: &str, rule: LabelRule) -> Verdict {
    if !answer_in_knowledge(answers, knowledge_text) {
        return Verdict::RetrievalError;
    }
    if is_correct(generated_answer, answers) {
        return Verdict::Correct;
    }
    match rule {
        LabelRule::Accuracy => Verdict::GroundingError,
        LabelRule::TokenOverlap if !shares_token(generated_answer, knowledge_text) => Verdict::GroundingError,
        LabelRule::TokenOverlap => Verdict::Correct,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Generated,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVerification {
    pub example_id: String,
    pub question: String,
    pub knowledge_text: String,
    pub generated_answer: String,
    pub label: Verdict,
    pub answer_source: AnswerSource,
}

impl LabeledVerification {
    /// Labels one example. Without a generated answer the first gold answer
    /// fills the output slot.
    pub fn new(example: &QAExample, knowledge_text: &str, generated: Option<&str>, rule: LabelRule) -> Self {
        let (answer, source) = match generated {
            Some(g) => (g.to_owned(), AnswerSource::Generated),
            None => (example.answers.gold.first().cloned().unwrap_or_default(), AnswerSource::Gold),
        };
        Self {
            example_id: example.example_id.clone(),
            question: example.question.clone(),
            knowledge_text: knowledge_text.to_owned(),
            label: auto_label(&example.answers, knowledge_text, &answer, rule),
            generated_answer: answer,
            answer_source: source,
        }
    }
}

/// One line of the verifier fine-tuning file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierTrainingRecord {
    pub example_id: String,
    pub template_id: u8,
    pub prompt: String,
    pub target: String,
}

pub fn emit_training_records(labeled: &LabeledVerification) -> Result<Vec<VerifierTrainingRecord>, VerifierError> {
    TEMPLATE_IDS
        .iter()
        .map(|&id| {
            Ok(VerifierTrainingRecord {
                example_id: labeled.example_id.clone(),
                template_id: id,
                prompt: render_instruction(id, &labeled.question, &labeled.knowledge_text, &labeled.generated_answer)?,
                target: labeled.label.letter().to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
}

impl ClassCounts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::RetrievalError => self.a += 1,
            Verdict::GroundingError => self.b += 1,
            Verdict::Correct => self.c += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.a + self.b + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStatsEntry {
    pub example_id: String,
    pub label: Verdict,
    pub answer_source: AnswerSource,
}

/// Sidecar written next to the training file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label_rule: LabelRule,
    pub splits: BTreeMap<String, ClassCounts>,
    pub answer_sources: BTreeMap<AnswerSource, usize>,
    pub examples: Vec<LabelStatsEntry>,
}

impl LabelStats {
    pub fn new(label_rule: LabelRule) -> Self {
        Self { label_rule, ..Self::default() }
    }

    pub fn record(&mut self, split: &str, labeled: &LabeledVerification) {
        self.splits.entry(split.to_owned()).or_default().add(labeled.label);
        *self.answer_sources.entry(labeled.answer_source).or_default() += 1;
        self.examples.push(LabelStatsEntry {
            example_id: labeled.example_id.clone(),
            label: labeled.label,
            answer_source: labeled.answer_source,
        });
    }
}
