//! Ensemble verification of (question, knowledge, answer) triples.

mod templates;

use serde::{Deserialize, Serialize};

use crate::lm::{score_options, LanguageModel, LmError, OptionScores, Session};

pub use templates::{render_instruction, template_body, TEMPLATE_IDS, TEMPLATE_VERSION};

pub const OPTIONS: [char; 3] = ['A', 'B', 'C'];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifierError {
    #[error("unknown template id {0} (expected 1..=5)")]
    UnknownTemplate(u8),
    #[error("template list is empty")]
    NoTemplates,
    #[error("template id {0} listed twice")]
    DuplicateTemplate(u8),
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Verifier classes, serialized as their option letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    /// A: the retrieved knowledge does not help answer the question.
    #[serde(rename = "A")]
    RetrievalError,
    /// B: the knowledge helps but the generated answer is wrong.
    #[serde(rename = "B")]
    GroundingError,
    /// C: the generated answer is correct.
    #[serde(rename = "C")]
    Correct,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::RetrievalError, Verdict::GroundingError, Verdict::Correct];

    pub fn letter(self) -> char {
        match self {
            Self::RetrievalError => 'A',
            Self::GroundingError => 'B',
            Self::Correct => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'A' => Some(Self::RetrievalError),
            'B' => Some(Self::GroundingError),
            'C' => Some(Self::Correct),
            _ => None,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionScores {
    pub template_id: u8,
    pub scores: OptionScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDistribution {
    pub probabilities: OptionScores,
    pub verdict: Verdict,
    pub per_instruction: Vec<InstructionScores>,
}

/// Argmax over A, B, C; on exact ties the earlier letter wins.
pub fn argmax_verdict(probabilities: &OptionScores) -> Verdict {
    let mut best = Verdict::RetrievalError;
    for v in Verdict::ALL {
        if probabilities.get(v.letter()) > probabilities.get(best.letter()) {
            best = v;
        }
    }
    best
}

/// Elementwise mean of per-instruction scores (sorted by template id) and its argmax.
pub fn ensemble(mut per_instruction: Vec<InstructionScores>) -> Result<VerdictDistribution, VerifierError> {
    if per_instruction.is_empty() {
        return Err(VerifierError::NoTemplates);
    }
    per_instruction.sort_by_key(|s| s.template_id);
    let n = per_instruction.len() as f64;
    let probabilities = if per_instruction.len() == 1 {
        per_instruction[0].scores.clone()
    } else {
        OptionScores(
            OPTIONS
                .iter()
                .map(|&o| (o, per_instruction.iter().map(|s| s.scores.get(o)).sum::<f64>() / n))
                .collect(),
        )
    };
    let verdict = argmax_verdict(&probabilities);
    Ok(VerdictDistribution { probabilities, verdict, per_instruction })
}

/// Renders each requested template, scores options A/B/C on the verifier LM
/// and ensembles the results. Any LM failure aborts the whole verification.
pub fn verify(
    question: &str,
    knowledge: &str,
    answer: &str,
    verifier: &dyn LanguageModel,
    session: &mut Session,
    template_ids: &[u8],
) -> Result<VerdictDistribution, VerifierError> {
    if template_ids.is_empty() {
        return Err(VerifierError::NoTemplates);
    }
    let mut ids = template_ids.to_vec();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(VerifierError::DuplicateTemplate(w[0]));
    }
    let mut per_instruction = Vec::with_capacity(ids.len());
    for id in ids {
        let prompt = render_instruction(id, question, knowledge, answer)?;
        let scores = score_options(verifier, session, &prompt, &OPTIONS)?;
        per_instruction.push(InstructionScores { template_id: id, scores });
    }
    ensemble(per_instruction)
}
