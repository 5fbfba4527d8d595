use std::collections::BTreeSet;

use super::trace::{Action, Disposition, PipelineTrace, WithholdReason};
use super::Mode;
use crate::verifier::Verdict;

/// Checks the structural invariants of a trace. Returns every violation found.
pub fn validate_trace(trace: &PipelineTrace) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let steps = &trace.steps;
    let budget = trace.max_rectify_steps as usize;
    let max_steps = match trace.mode {
        Mode::Naive | Mode::KnowledgeAugmented => 1,
        Mode::AdaptiveConfidence => 2,
        _ => 1 + budget,
    };
    if steps.len() > max_steps {
        errs.push(format!("{} steps exceed the limit of {max_steps}", steps.len()));
    }
    for (i, s) in steps.iter().enumerate() {
        if s.step_index as usize != i {
            errs.push(format!("step {i} has step_index {}", s.step_index));
        }
        if s.knowledge_item_id.is_some() != s.knowledge_text.is_some() {
            errs.push(format!("step {i}: knowledge id and text must be present together"));
        }
        let last = i + 1 == steps.len();
        let continues = matches!(s.action_taken, Action::Reretrieve | Action::Regenerate);
        if last && continues && trace.disposition != Disposition::Failed {
            errs.push(format!("step {i}: final step cannot end with {:?}", s.action_taken));
        }
        if !last && !continues {
            errs.push(format!("step {i}: {:?} before the final step", s.action_taken));
        }
        if let Some(v) = &s.verdict {
            let expected = match v.verdict {
                Verdict::Correct => &[Action::Deliver][..],
                Verdict::RetrievalError => &[Action::Reretrieve, Action::Withhold][..],
                Verdict::GroundingError => &[Action::Regenerate, Action::Withhold][..],
            };
            if !expected.contains(&s.action_taken) {
                errs.push(format!("step {i}: verdict {} followed by {:?}", v.verdict.letter(), s.action_taken));
            }
        }
        if let Some(g) = &s.gate {
            let ok = match s.action_taken {
                Action::Deliver => g.passed || trace.mode == Mode::AdaptiveConfidence,
                _ => !g.passed,
            };
            if !ok {
                errs.push(format!("step {i}: gate passed={} but action {:?}", g.passed, s.action_taken));
            }
        }
        if let Some(next) = steps.get(i + 1) {
            match s.action_taken {
                Action::Regenerate if next.knowledge_item_id != s.knowledge_item_id => {
                    errs.push(format!("step {}: regenerate changed the knowledge", i + 1));
                }
                Action::Reretrieve => {
                    let fresh = next.knowledge_item_id.as_ref().is_some_and(|id| {
                        !steps[..=i].iter().any(|p| p.knowledge_item_id.as_ref() == Some(id))
                    });
                    if !fresh {
                        errs.push(format!("step {}: reretrieve did not bring unused knowledge", i + 1));
                    }
                }
                _ => {}
            }
        }
    }
    if trace.mode == Mode::Kalmv && !steps.is_empty() && trace.disposition != Disposition::Failed {
        let distinct: BTreeSet<_> = steps.iter().filter_map(|s| s.knowledge_item_id.as_ref()).collect();
        let reretrieved = steps.iter().filter(|s| s.action_taken == Action::Reretrieve).count();
        if distinct.len() != 1 + reretrieved {
            errs.push(format!("{} distinct knowledge items but {reretrieved} re-retrievals", distinct.len()));
        }
        if steps.iter().any(|s| s.verdict.is_none()) {
            errs.push("kalmv step without a verdict".into());
        }
    }
    let any_c = steps.iter().any(|s| s.verdict.as_ref().is_some_and(|v| v.verdict == Verdict::Correct));
    match trace.disposition {
        Disposition::Answered => {
            match (&trace.final_answer, steps.last()) {
                (Some(a), Some(last)) => {
                    if &last.generated_answer != a {
                        errs.push("final_answer differs from the last generated answer".into());
                    }
                    if last.action_taken != Action::Deliver {
                        errs.push("answered trace must end with deliver".into());
                    }
                    if last.verdict.as_ref().is_some_and(|v| v.verdict != Verdict::Correct) {
                        errs.push("answered trace whose last verdict is not C".into());
                    }
                }
                (None, _) => errs.push("answered trace without final_answer".into()),
                (_, None) => errs.push("answered trace without steps".into()),
            }
            if trace.withhold_reason.is_some() || trace.error.is_some() {
                errs.push("answered trace carries a withhold reason or error".into());
            }
        }
        Disposition::Withheld => {
            if trace.final_answer.is_some() {
                errs.push("withheld trace has a final_answer".into());
            }
            if any_c {
                errs.push("withheld trace contains a C verdict".into());
            }
            if steps.last().is_some_and(|s| s.action_taken != Action::Withhold) {
                errs.push("withheld trace must end with withhold".into());
            }
            match trace.withhold_reason {
                Some(WithholdReason::BudgetExhausted) if steps.len() != 1 + budget => {
                    errs.push(format!("budget withhold after {} steps, expected {}", steps.len(), 1 + budget));
                }
                Some(_) => {}
                None => errs.push("withheld trace without a reason".into()),
            }
        }
        Disposition::Failed => {
            if trace.error.is_none() {
                errs.push("failed trace without an error".into());
            }
            if trace.final_answer.is_some() {
                errs.push("failed trace has a final_answer".into());
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
