use std::collections::BTreeMap;
use std::time::Instant;

use super::trace::{Action, GateCheck, PipelineStep, WithholdReason};
use super::{PipelineConfig, PipelineError};
use crate::lm::{self, build_qa_prompt, GenerationParams, LanguageModel, Session};
use crate::prompt_digest;
use crate::retrieval::{ExclusionSet, Hit, Retriever};
use crate::verifier::{self, VerdictDistribution};

/// Shared, read-only handles a strategy may call.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub retriever: Option<&'a dyn Retriever>,
    pub lm: &'a dyn LanguageModel,
    pub verifier: Option<&'a dyn LanguageModel>,
}

/// How a strategy finished. The steps themselves live in the [`RunContext`].
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Answered(String),
    Withheld(WithholdReason),
}

/// A generated answer before its step is recorded.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub knowledge: Option<Hit>,
    pub prompt_digest: String,
    pub prompt: String,
    pub answer: String,
    started: Instant,
}

/// Everything owned by one question run: attempt counters, exclusions and
/// the steps recorded so far. Never shared between questions.
pub struct RunContext<'a> {
    pub config: &'a PipelineConfig,
    pub resources: Resources<'a>,
    pub seed: u64,
    pub session: Session,
    pub exclusions: ExclusionSet,
    pub steps: Vec<PipelineStep>,
}

impl<'a> RunContext<'a> {
    pub fn new(config: &'a PipelineConfig, resources: Resources<'a>, seed: u64) -> Self {
        Self { config, resources, seed, session: Session::new(), exclusions: ExclusionSet::new(), steps: Vec::new() }
    }

    pub fn retriever(&self) -> Result<&'a dyn Retriever, PipelineError> {
        self.resources.retriever.ok_or(PipelineError::MissingResource("retrieval index"))
    }

    pub fn verifier(&self) -> Result<&'a dyn LanguageModel, PipelineError> {
        self.resources.verifier.ok_or(PipelineError::MissingResource("verifier endpoint"))
    }

    /// Next best unused knowledge; marks it used.
    pub fn retrieve_next(&mut self, question: &str) -> Result<Option<Hit>, PipelineError> {
        let hit = self.retriever()?.retrieve_next(question, &self.exclusions)?;
        if let Some(h) = &hit {
            self.exclusions.extend(h.member_ids.iter().cloned());
        }
        Ok(hit)
    }

    pub fn generate(
        &mut self,
        question: &str,
        knowledge: Option<Hit>,
        params: &GenerationParams,
    ) -> Result<Attempt, PipelineError> {
        let started = Instant::now();
        let prompt = build_qa_prompt(question, knowledge.as_ref().map(|h| h.item.text.as_str()));
        let params = params.with_seed(self.seed);
        let out = lm::generate(self.resources.lm, &mut self.session, &prompt, &params)?;
        Ok(Attempt { knowledge, prompt_digest: prompt_digest(&prompt), prompt, answer: out.text, started })
    }

    pub fn verify(&mut self, question: &str, attempt: &Attempt) -> Result<VerdictDistribution, PipelineError> {
        let verifier = self.verifier()?;
        let knowledge = attempt.knowledge.as_ref().map_or("", |h| h.item.text.as_str());
        Ok(verifier::verify(question, knowledge, &attempt.answer, verifier, &mut self.session, &self.config.template_ids)?)
    }

    pub fn confidence(&self, attempt: &Attempt) -> Result<f64, PipelineError> {
        Ok(lm::answer_confidence(self.resources.lm, &attempt.prompt, &attempt.answer)?)
    }

    pub fn record(
        &mut self,
        attempt: &Attempt,
        verdict: Option<VerdictDistribution>,
        gate: Option<GateCheck>,
        action: Action,
    ) {
        let wall_time_ms = self.config.record_timing.then(|| attempt.started.elapsed().as_millis() as u64);
        self.steps.push(PipelineStep {
            step_index: self.steps.len() as u32,
            knowledge_item_id: attempt.knowledge.as_ref().map(|h| h.item.item_id.clone()),
            knowledge_text: attempt.knowledge.as_ref().map(|h| h.item.text.clone()),
            prompt_digest: attempt.prompt_digest.clone(),
            generated_answer: attempt.answer.clone(),
            verdict,
            gate,
            action_taken: action,
            wall_time_ms,
        });
    }
}

/// One answering method (a baseline or the verified pipeline).
pub trait AnswerStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn needs_retriever(&self) -> bool {
        true
    }

    fn needs_verifier(&self) -> bool {
        false
    }

    fn run(&self, question: &str, ctx: &mut RunContext<'_>) -> Result<Outcome, PipelineError>;
}

/// Strategies by name. `Default` holds the six built-in modes.
pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Box<dyn AnswerStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { strategies: BTreeMap::new() }
    }

    pub fn register(&mut self, strategy: Box<dyn AnswerStrategy>) -> Option<Box<dyn AnswerStrategy>> {
        self.strategies.insert(strategy.name(), strategy)
    }

    pub fn get(&self, name: &str) -> Option<&dyn AnswerStrategy> {
        self.strategies.get(name).map(Box::as_ref)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.strategies.keys().copied()
    }

    /// Fails when `name` is unknown or a resource it requires is absent.
    pub fn check(&self, name: &str, resources: &Resources<'_>) -> Result<&dyn AnswerStrategy, PipelineError> {
        let s = self.get(name).ok_or_else(|| PipelineError::UnknownMode(name.to_owned()))?;
        if s.needs_retriever() && resources.retriever.is_none() {
            return Err(PipelineError::MissingResource("retrieval index"));
        }
        if s.needs_verifier() && resources.verifier.is_none() {
            return Err(PipelineError::MissingResource("verifier endpoint"));
        }
        Ok(s)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        use super::strategies::*;
        let mut r = Self::empty();
        r.register(Box::new(Naive));
        r.register(Box::new(KnowledgeAugmented));
        r.register(Box::new(AdaptiveConfidence));
        r.register(Box::new(Augmenter::knowledge_f1()));
        r.register(Box::new(Augmenter::confidence()));
        r.register(Box::new(Kalmv));
        r
    }
}
