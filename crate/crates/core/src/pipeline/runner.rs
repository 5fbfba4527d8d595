use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::strategy::{Outcome, Resources, RunContext, StrategyRegistry};
use super::trace::{Disposition, PipelineTrace, TRACE_SCHEMA_VERSION};
use super::{PipelineConfig, PipelineError};
use crate::corpus::QAExample;

/// Per-question seed: the first eight bytes of SHA-256("{root}:{example_id}").
pub fn question_seed(root: u64, example_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{root}:{example_id}").as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Runs one question. Backend failures become a `failed` trace that keeps the
/// steps completed so far; configuration problems are returned as errors.
pub fn run_question(
    registry: &StrategyRegistry,
    config: &PipelineConfig,
    resources: Resources<'_>,
    example: &QAExample,
    root_seed: u64,
) -> Result<PipelineTrace, PipelineError> {
    let strategy = registry.check(config.mode.as_str(), &resources)?;
    let mut ctx = RunContext::new(config, resources, question_seed(root_seed, &example.example_id));
    let result = strategy.run(&example.question, &mut ctx);
    let mut trace = PipelineTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        example_id: example.example_id.clone(),
        question: example.question.clone(),
        answers: example.answers.clone(),
        mode: config.mode,
        max_rectify_steps: config.max_rectify_steps,
        steps: ctx.steps,
        disposition: Disposition::Failed,
        final_answer: None,
        withhold_reason: None,
        error: None,
    };
    match result {
        Ok(Outcome::Answered(answer)) => {
            trace.disposition = Disposition::Answered;
            trace.final_answer = Some(answer);
        }
        Ok(Outcome::Withheld(reason)) => {
            trace.disposition = Disposition::Withheld;
            trace.withhold_reason = Some(reason);
        }
        Err(e @ (PipelineError::UnknownMode(_) | PipelineError::MissingResource(_))) => return Err(e),
        Err(e) => {
            log::warn!("{}: {e}", example.example_id);
            trace.error = Some(e.to_string());
        }
    }
    Ok(trace)
}

/// Runs every example on a pool of `parallelism` threads. Output order
/// matches input order regardless of scheduling.
pub fn run_dataset(
    registry: &StrategyRegistry,
    config: &PipelineConfig,
    resources: Resources<'_>,
    examples: &[QAExample],
    root_seed: u64,
    parallelism: usize,
) -> Result<Vec<PipelineTrace>, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    registry.check(config.mode.as_str(), &resources)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| {
        examples
            .par_iter()
            .map(|ex| run_question(registry, config, resources, ex, root_seed))
            .collect()
    })
}
