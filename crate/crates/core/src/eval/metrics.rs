use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::{answer_acc, answer_em, answer_f1, is_correct};
use crate::labeler::{auto_label, LabelRule};
use crate::pipeline::{Disposition, Mode, PipelineTrace};
use crate::verifier::Verdict;

/// F1/EM/Acc means over some set of questions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub em: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerMetrics {
    pub n_total: usize,
    pub n_answered: usize,
    pub n_withheld: usize,
    pub n_failed: usize,
    /// Means over answered and withheld questions; withheld ones score 0.
    /// Failed questions are left out. Absent when nothing was scored.
    pub overall: Option<Scores>,
    /// Means over delivered answers only.
    pub delivered: Option<Scores>,
    pub withhold_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierMetrics {
    /// Traces whose final step carries a verdict.
    pub n_verified: usize,
    /// Gold-class counts on final verified steps, keyed by option letter.
    pub class_counts: BTreeMap<Verdict, usize>,
    /// Absent when no trace carries verdicts; a class with no gold examples maps to `None`.
    pub per_class_accuracy: Option<BTreeMap<Verdict, Option<f64>>>,
    pub class_ratios: Option<BTreeMap<Verdict, f64>>,
    /// Delivered answers that are correct, over all delivered answers.
    pub precision: Option<f64>,
    /// Delivered answers that are correct, over questions whose final-step
    /// answer is correct whatever its verdict.
    pub recall: Option<f64>,
    /// Harmonic mean; 0 when precision and recall are both 0, absent when either is.
    pub f1: Option<f64>,
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

fn score_answer(answer: &str, trace: &PipelineTrace) -> Scores {
    Scores {
        f1: answer_f1(answer, &trace.answers),
        em: f64::from(answer_em(answer, &trace.answers)),
        acc: f64::from(answer_acc(answer, &trace.answers)),
    }
}

pub fn answer_metrics(traces: &[PipelineTrace]) -> AnswerMetrics {
    let per_trace: Vec<(Disposition, Option<Scores>)> = traces
        .par_iter()
        .map(|t| (t.disposition, t.final_answer.as_deref().map(|a| score_answer(a, t))))
        .collect();
    let mut m = AnswerMetrics {
        n_total: traces.len(),
        n_answered: 0,
        n_withheld: 0,
        n_failed: 0,
        overall: None,
        delivered: None,
        withhold_rate: None,
    };
    let mut sum = Scores { f1: 0.0, em: 0.0, acc: 0.0 };
    for (disposition, scores) in per_trace {
        match disposition {
            Disposition::Answered => {
                m.n_answered += 1;
                if let Some(s) = scores {
                    sum.f1 += s.f1;
                    sum.em += s.em;
                    sum.acc += s.acc;
                }
            }
            Disposition::Withheld => m.n_withheld += 1,
            Disposition::Failed => m.n_failed += 1,
        }
    }
    let scored = m.n_answered + m.n_withheld;
    let over = |n: usize| {
        Some(Scores { f1: mean(sum.f1, n)?, em: mean(sum.em, n)?, acc: mean(sum.acc, n)? })
    };
    m.overall = over(scored);
    m.delivered = over(m.n_answered);
    m.withhold_rate = mean(m.n_withheld as f64, scored);
    m
}

struct TraceOutcome {
    /// (gold, predicted) class of the final step, when it was verified.
    pair: Option<(Verdict, Verdict)>,
    delivered: bool,
    delivered_correct: bool,
    final_correct: bool,
}

pub fn verifier_metrics(traces: &[PipelineTrace], rule: LabelRule) -> VerifierMetrics {
    let per_trace: Vec<TraceOutcome> = traces
        .par_iter()
        .filter(|t| t.disposition != Disposition::Failed)
        .map(|t| {
            let last = t.last_step();
            let pair = last.and_then(|s| {
                let v = s.verdict.as_ref()?;
                let gold = auto_label(&t.answers, s.knowledge_text.as_deref().unwrap_or(""), &s.generated_answer, rule);
                Some((gold, v.verdict))
            });
            let final_correct = last.is_some_and(|s| is_correct(&s.generated_answer, &t.answers));
            let delivered = t.disposition == Disposition::Answered;
            let delivered_correct = t.final_answer.as_deref().is_some_and(|a| delivered && is_correct(a, &t.answers));
            TraceOutcome { pair, delivered, delivered_correct, final_correct }
        })
        .collect();

    let mut class_counts: BTreeMap<Verdict, usize> = Verdict::ALL.iter().map(|&v| (v, 0)).collect();
    let mut class_hits: BTreeMap<Verdict, usize> = class_counts.clone();
    let (mut n_verified, mut delivered, mut delivered_correct, mut final_correct) = (0, 0, 0, 0);
    for o in per_trace {
        if let Some((gold, predicted)) = o.pair {
            n_verified += 1;
            *class_counts.get_mut(&gold).unwrap() += 1;
            if gold == predicted {
                *class_hits.get_mut(&gold).unwrap() += 1;
            }
        }
        delivered += usize::from(o.delivered);
        delivered_correct += usize::from(o.delivered_correct);
        final_correct += usize::from(o.final_correct);
    }
    let per_class_accuracy = (n_verified > 0)
        .then(|| class_counts.iter().map(|(&v, &n)| (v, mean(class_hits[&v] as f64, n))).collect());
    let class_ratios =
        (n_verified > 0).then(|| class_counts.iter().map(|(&v, &n)| (v, n as f64 / n_verified as f64)).collect());
    let precision = mean(delivered_correct as f64, delivered);
    let recall = mean(delivered_correct as f64, final_correct);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    VerifierMetrics { n_verified, class_counts, per_class_accuracy, class_ratios, precision, recall, f1 }
}

/// One row of a report: all traces sharing a mode and step budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub mode: Mode,
    pub max_rectify_steps: u32,
    pub answer: AnswerMetrics,
    pub verifier: VerifierMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_traces: usize,
    pub label_rule: LabelRule,
    pub groups: Vec<GroupReport>,
}

/// Groups traces by (mode, max_rectify_steps), in that sort order.
pub fn evaluate(traces: &[PipelineTrace], rule: LabelRule) -> EvalReport {
    let mut groups: BTreeMap<(Mode, u32), Vec<PipelineTrace>> = BTreeMap::new();
    for t in traces {
        groups.entry((t.mode, t.max_rectify_steps)).or_default().push(t.clone());
    }
    let groups = groups
        .into_iter()
        .map(|((mode, max_rectify_steps), ts)| GroupReport {
            mode,
            max_rectify_steps,
            answer: answer_metrics(&ts),
            verifier: verifier_metrics(&ts, rule),
        })
        .collect();
    EvalReport { n_traces: traces.len(), label_rule: rule, groups }
}
