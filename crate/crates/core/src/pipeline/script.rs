use std::fmt::Write;

use crate::lm::{build_qa_prompt, MockLm, MockRecord};
use crate::verifier::{render_instruction, Verdict, VerifierError, TEMPLATE_IDS};

/// Builds mock fixtures for whole pipeline runs without computing digests by
/// hand. Generation and verifier records share one fixture.
#[derive(Debug, Clone, Default)]
pub struct MockScript {
    records: Vec<MockRecord>,
    template_ids: Vec<u8>,
}

impl MockScript {
    pub fn new() -> Self {
        Self { records: Vec::new(), template_ids: TEMPLATE_IDS.to_vec() }
    }

    pub fn with_templates(mut self, template_ids: &[u8]) -> Self {
        self.template_ids = template_ids.to_vec();
        self
    }

    /// Scripts the `attempt`-th generation for the QA prompt.
    pub fn answer(&mut self, question: &str, knowledge: Option<&str>, attempt: u32, text: &str) -> &mut Self {
        self.records.push(MockRecord::new(&build_qa_prompt(question, knowledge), attempt, text));
        self
    }

    /// Like [`answer`](Self::answer) but also scripts the answer's summed log-probability.
    pub fn scored_answer(
        &mut self,
        question: &str,
        knowledge: Option<&str>,
        attempt: u32,
        text: &str,
        logprob: f64,
    ) -> &mut Self {
        let prompt = build_qa_prompt(question, knowledge);
        self.records.push(MockRecord::new(&prompt, attempt, text).with_sequence_logprob(logprob));
        self
    }

    /// Scripts every configured template to vote `verdict` for this triple.
    pub fn verdict(
        &mut self,
        question: &str,
        knowledge: &str,
        answer: &str,
        attempt: u32,
        verdict: Verdict,
    ) -> Result<&mut Self, VerifierError> {
        for &id in &self.template_ids {
            let prompt = render_instruction(id, question, knowledge, answer)?;
            self.records.push(MockRecord::new(&prompt, attempt, verdict.letter().to_string()));
        }
        Ok(self)
    }

    pub fn records(&self) -> &[MockRecord] {
        &self.records
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).unwrap();
        }
        out
    }

    pub fn build(&self) -> MockLm {
        MockLm::from_records(self.records.clone())
    }
}
