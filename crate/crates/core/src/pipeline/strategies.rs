use super::strategy::{AnswerStrategy, Outcome, RunContext};
use super::trace::{Action, GateCheck, GateKind, WithholdReason};
use super::{knowledge_f1, Mode, PipelineError};
use crate::verifier::Verdict;

/// Answers from parametric knowledge only.
pub struct Naive;

impl AnswerStrategy for Naive {
    fn name(&self) -> &'static str {
        Mode::Naive.as_str()
    }

    fn needs_retriever(&self) -> bool {
        false
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError> {
        let cfg = ctx.config;
        let attempt = ctx.generate(question, None, &cfg.first_generation)?;
        ctx.record(&attempt, None, None, Action::Deliver);
        Ok(Outcome::Answered(attempt.answer))
    }
}

/// Top-1 retrieval, one greedy answer, always delivered.
pub struct KnowledgeAugmented;

impl AnswerStrategy for KnowledgeAugmented {
    fn name(&self) -> &'static str {
        Mode::KnowledgeAugmented.as_str()
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError> {
        let cfg = ctx.config;
        let hit = ctx.retrieve_next(question)?;
        let attempt = ctx.generate(question, hit, &cfg.first_generation)?;
        ctx.record(&attempt, None, None, Action::Deliver);
        Ok(Outcome::Answered(attempt.answer))
    }
}

/// Retrieves only when the naive answer's confidence is below the threshold.
pub struct AdaptiveConfidence;

impl AnswerStrategy for AdaptiveConfidence {
    fn name(&self) -> &'static str {
        Mode::AdaptiveConfidence.as_str()
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError> {
        let cfg = ctx.config;
        let naive = ctx.generate(question, None, &cfg.first_generation)?;
        let threshold = cfg.confidence_threshold;
        let value = ctx.confidence(&naive)?;
        let gate = GateCheck { kind: GateKind::Confidence, value, threshold, passed: value >= threshold };
        if gate.passed {
            ctx.record(&naive, None, Some(gate), Action::Deliver);
            return Ok(Outcome::Answered(naive.answer));
        }
        let Some(hit) = ctx.retrieve_next(question)? else {
            // nothing to augment with; the naive answer stands
            ctx.record(&naive, None, Some(gate), Action::Deliver);
            return Ok(Outcome::Answered(naive.answer));
        };
        ctx.record(&naive, None, Some(gate), Action::Reretrieve);
        let augmented = ctx.generate(question, Some(hit), &cfg.first_generation)?;
        ctx.record(&augmented, None, None, Action::Deliver);
        Ok(Outcome::Answered(augmented.answer))
    }
}

/// Retrieve-then-generate with a heuristic grounding check; rejected answers
/// are re-sampled against the same knowledge (it never re-retrieves).
pub struct Augmenter {
    gate: GateKind,
}

impl Augmenter {
    pub fn knowledge_f1() -> Self {
        Self { gate: GateKind::KnowledgeF1 }
    }

    pub fn confidence() -> Self {
        Self { gate: GateKind::Confidence }
    }
}

impl AnswerStrategy for Augmenter {
    fn name(&self) -> &'static str {
        match self.gate {
            GateKind::KnowledgeF1 => Mode::AugmenterKf1.as_str(),
            GateKind::Confidence => Mode::AugmenterConfidence.as_str(),
        }
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError> {
        let cfg = ctx.config;
        let Some(hit) = ctx.retrieve_next(question)? else {
            return Ok(Outcome::Withheld(WithholdReason::KnowledgeExhausted));
        };
        let mut attempt = ctx.generate(question, Some(hit.clone()), &cfg.first_generation)?;
        let mut used = 0;
        loop {
            let (value, threshold) = match self.gate {
                GateKind::KnowledgeF1 => (knowledge_f1(&hit.item.text, &attempt.answer), cfg.kf1_threshold),
                GateKind::Confidence => (ctx.confidence(&attempt)?, cfg.confidence_threshold),
            };
            let gate = GateCheck { kind: self.gate, value, threshold, passed: value >= threshold };
            if gate.passed {
                ctx.record(&attempt, None, Some(gate), Action::Deliver);
                return Ok(Outcome::Answered(attempt.answer));
            }
            if used == cfg.max_rectify_steps {
                ctx.record(&attempt, None, Some(gate), Action::Withhold);
                return Ok(Outcome::Withheld(WithholdReason::BudgetExhausted));
            }
            ctx.record(&attempt, None, Some(gate), Action::Regenerate);
            attempt = ctx.generate(question, Some(hit.clone()), &cfg.resample_generation)?;
            used += 1;
        }
    }
}

/// Retrieve, generate, verify; re-retrieve on a retrieval error, re-sample on
/// a grounding error, withhold when the budget runs out.
pub struct Kalmv;

impl AnswerStrategy for Kalmv {
    fn name(&self) -> &'static str {
        Mode::Kalmv.as_str()
    }

    fn needs_verifier(&self) -> bool {
        true
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError> {
        let cfg = ctx.config;
        let Some(hit) = ctx.retrieve_next(question)? else {
            return Ok(Outcome::Withheld(WithholdReason::KnowledgeExhausted));
        };
        let mut attempt = ctx.generate(question, Some(hit), &cfg.first_generation)?;
        let mut used = 0;
        loop {
            let verdict = ctx.verify(question, &attempt)?;
            let kind = verdict.verdict;
            if kind == Verdict::Correct {
                ctx.record(&attempt, Some(verdict), None, Action::Deliver);
                return Ok(Outcome::Answered(attempt.answer));
            }
            if used == cfg.max_rectify_steps {
                ctx.record(&attempt, Some(verdict), None, Action::Withhold);
                return Ok(Outcome::Withheld(WithholdReason::BudgetExhausted));
            }
            let next = match kind {
                Verdict::RetrievalError => {
                    let Some(fresh) = ctx.retrieve_next(question)? else {
                        ctx.record(&attempt, Some(verdict), None, Action::Withhold);
                        return Ok(Outcome::Withheld(WithholdReason::KnowledgeExhausted));
                    };
                    ctx.record(&attempt, Some(verdict), None, Action::Reretrieve);
                    ctx.generate(question, Some(fresh), &cfg.first_generation)?
                }
                _ => {
                    ctx.record(&attempt, Some(verdict), None, Action::Regenerate);
                    let same = attempt.knowledge.clone();
                    ctx.generate(question, same, &cfg.resample_generation)?
                }
            };
            attempt = next;
            used += 1;
        }
    }
}
