use std::collections::HashMap;

use crate::corpus::{contains_sequence, metric_tokens, AnswerSet};

/// Token-multiset F1 between two already-normalized token lists; 0 when
/// either side is empty.
pub fn token_f1(prediction: &[String], reference: &[String]) -> f64 {
    if prediction.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in prediction {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / prediction.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Normalized gold/alias forms; forms that normalize to nothing are dropped.
fn gold_forms(answers: &AnswerSet) -> impl Iterator<Item = Vec<String>> + '_ {
    answers.surface_forms().map(metric_tokens).filter(|t| !t.is_empty())
}

/// Best token F1 against any gold answer or alias.
pub fn answer_f1(prediction: &str, answers: &AnswerSet) -> f64 {
    let pred = metric_tokens(prediction);
    gold_forms(answers).map(|g| token_f1(&pred, &g)).fold(0.0, f64::max)
}

/// 1 when the normalized prediction equals a normalized gold answer or alias.
pub fn answer_em(prediction: &str, answers: &AnswerSet) -> u8 {
    let pred = metric_tokens(prediction);
    u8::from(!pred.is_empty() && gold_forms(answers).any(|g| g == pred))
}

/// 1 when some normalized gold answer or alias occurs as a contiguous token
/// run inside the normalized prediction.
pub fn answer_acc(prediction: &str, answers: &AnswerSet) -> u8 {
    let pred = metric_tokens(prediction);
    u8::from(gold_forms(answers).any(|g| contains_sequence(&pred, &g)))
}

pub fn is_correct(prediction: &str, answers: &AnswerSet) -> bool {
    answer_acc(prediction, answers) == 1
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn gold(g: &[&str]) -> AnswerSet {
        AnswerSet::new(g.iter().copied())
    }

    #[test]
    fn identity_is_perfect() {
        let g = gold(&["David Gahan"]);
        assert_eq!(answer_f1("David Gahan", &g), 1.0);
        assert_eq!(answer_em("David Gahan", &g), 1);
        assert_eq!(answer_acc("David Gahan", &g), 1);
    }

    #[test]
    fn partial_overlap_f1() {
        // overlap {bobby, scott}: precision 2/5, recall 2/2 -> 2*0.4/1.4 = 0.571428...
        let f = answer_f1("Bobby Scott and Bob Russell", &gold(&["Bobby Scott"]));
        assert!((f - 0.5714).abs() < 5e-5, "{f}");
        assert!((f - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn alias_takes_max() {
        let g = gold(&["5.5 degrees"]).with_aliases("5.5 degrees", ["five point five degrees"]);
        assert_eq!(answer_f1("five point five degrees", &g), 1.0);
        assert_eq!(answer_em("five point five degrees", &g), 1);
        // without the alias only "degrees" overlaps: p = 1/4, r = 1/2, F1 = 1/3
        assert!((answer_f1("five point five degrees", &gold(&["5.5 degrees"])) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_cases() {
        let g = gold(&["David Gahan"]);
        assert_eq!(answer_em("The David Gahan", &g), 1);
        assert_eq!(answer_em("David", &g), 0);
        assert_eq!(answer_em("", &g), 0);
    }

    #[test]
    fn containment_cases() {
        assert_eq!(answer_acc("September 14, 2008", &gold(&["September 14, 2008", "2008"])), 1);
        assert_eq!(answer_acc("Bobby Scott and Bob Russell", &gold(&["Bobby Scott", "Bob Russell"])), 1);
        assert_eq!(answer_acc("", &gold(&["x"])), 0);
        assert_eq!(answer_acc("Mozart", &gold(&["art"])), 0);
    }

    #[test]
    fn article_only_gold_never_matches() {
        let g = gold(&["the"]);
        assert_eq!(answer_em("a", &g), 0);
        assert_eq!(answer_acc("the thing", &g), 0);
        assert_eq!(answer_f1("the", &g), 0.0);
    }

    fn words() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof!["a", "the", "x", "y", "z", "Bob", "bob", "w."], 0..6).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn em_bounded_by_acc_and_f1(pred in words(), g1 in words(), g2 in words()) {
            let answers = AnswerSet::new([g1, g2]);
            let em = answer_em(&pred, &answers);
            prop_assert!(em <= answer_acc(&pred, &answers));
            prop_assert!(f64::from(em) <= answer_f1(&pred, &answers) + 1e-12);
        }

        #[test]
        fn invariant_to_case_and_surrounding_punctuation(pred in words(), g in words()) {
            let answers = AnswerSet::new([g]);
            let noisy = format!("\"{}!?", pred.to_uppercase());
            prop_assert_eq!(answer_em(&pred, &answers), answer_em(&noisy, &answers));
            prop_assert_eq!(answer_acc(&pred, &answers), answer_acc(&noisy, &answers));
            prop_assert_eq!(answer_f1(&pred, &answers), answer_f1(&noisy, &answers));
        }

        #[test]
        fn aliases_never_lower_scores(pred in words(), g in "[a-z]{1,5}", alias in words()) {
            let plain = AnswerSet::new([g.clone()]);
            let aliased = plain.clone().with_aliases(&g, [alias]);
            prop_assert!(answer_f1(&pred, &aliased) >= answer_f1(&pred, &plain));
            prop_assert!(answer_em(&pred, &aliased) >= answer_em(&pred, &plain));
            prop_assert!(answer_acc(&pred, &aliased) >= answer_acc(&pred, &plain));
        }
    }
}
