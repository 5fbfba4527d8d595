use std::fmt::Write;

use super::metrics::EvalReport;
use crate::verifier::Verdict;

pub fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"))
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

/// Answer quality per (mode, budget) group.
pub fn answer_table(report: &EvalReport) -> String {
    let header = ["mode", "max_steps", "n", "answered", "withheld", "failed", "f1", "em", "acc", "withhold_rate"];
    let rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            let a = &g.answer;
            vec![
                g.mode.to_string(),
                g.max_rectify_steps.to_string(),
                a.n_total.to_string(),
                a.n_answered.to_string(),
                a.n_withheld.to_string(),
                a.n_failed.to_string(),
                num(a.overall.map(|s| s.f1)),
                num(a.overall.map(|s| s.em)),
                num(a.overall.map(|s| s.acc)),
                num(a.withhold_rate),
            ]
        })
        .collect();
    let mut out = render_table(&header, &rows);
    writeln!(out, "{} traces", report.n_traces).unwrap();
    out
}

/// Verifier quality per (mode, budget) group; one row per step budget
/// gives the rectification sweep.
pub fn verifier_table(report: &EvalReport) -> String {
    let header = [
        "mode", "max_steps", "verified", "acc_A", "acc_B", "acc_C", "ratio_A", "ratio_B", "ratio_C", "precision",
        "recall", "f1",
    ];
    let rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            let v = &g.verifier;
            let mut row = vec![g.mode.to_string(), g.max_rectify_steps.to_string(), v.n_verified.to_string()];
            for c in Verdict::ALL {
                row.push(num(v.per_class_accuracy.as_ref().and_then(|m| m[&c])));
            }
            for c in Verdict::ALL {
                row.push(num(v.class_ratios.as_ref().map(|m| m[&c])));
            }
            row.extend([num(v.precision), num(v.recall), num(v.f1)]);
            row
        })
        .collect();
    let mut out = render_table(&header, &rows);
    writeln!(out, "{} traces, label rule {}", report.n_traces, report.label_rule.as_str()).unwrap();
    out
}
