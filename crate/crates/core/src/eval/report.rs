use std::fmt::Write as _;

use super::bench::BenchmarkOutcome;
use super::metrics::Metrics;
use super::score::EvalCounts;
use super::CategoryCounts;
use crate::domain::Category;

const LABEL_WIDTH: usize = 22;
const VALUE_WIDTH: usize = 6;

fn category_name(c: Category) -> &'static str {
    match c {
        Category::WentWell => "went well",
        Category::DidNotGoWell => "did not go well",
        Category::UnclearNeutral => "unclear/neutral",
        Category::Irrelevant => "irrelevant",
    }
}

fn row(out: &mut String, label: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{label:<LABEL_WIDTH$}{value:>VALUE_WIDTH$}");
}

fn block(out: &mut String, name: &str, counts: &CategoryCounts) {
    row(out, name, counts.total());
    for c in Category::ALL {
        row(out, &format!("  {}", category_name(c)), counts.get(c));
    }
}

/// Plain-text table: set size, the four outcome totals each followed by
/// their per-category split, then both match percentages.
pub fn render_report(counts: &EvalCounts, metrics: &Metrics) -> String {
    let mut out = String::new();
    row(&mut out, "set size", counts.n);
    block(&mut out, "correct", &counts.correct);
    block(&mut out, "incorrect", &counts.incorrect);
    block(&mut out, "missing", &counts.missing);
    block(&mut out, "duplicated", &counts.duplicated);
    row(&mut out, "match (simple)", format!("{}%", metrics.match_simple));
    row(&mut out, "match (overall)", format!("{}%", metrics.match_overall));
    out
}

/// Per-run reports followed by the multi-run summary.
pub fn render_benchmark(outcome: &BenchmarkOutcome) -> String {
    let mut out = String::new();
    for run in &outcome.runs {
        let _ = writeln!(out, "== run {} ({}) ==", run.run, outcome.template);
        match &run.result {
            Ok(scored) => out.push_str(&render_report(&scored.counts, &scored.metrics)),
            Err(reason) => {
                let _ = writeln!(out, "FAILED: {reason}");
            }
        }
        out.push('\n');
    }
    let s = &outcome.summary;
    let _ = writeln!(out, "== summary ==");
    row(&mut out, "runs", s.runs);
    row(&mut out, "failed", s.failed);
    match (s.match_overall_mean, s.match_overall_min, s.match_overall_max) {
        (Some(mean), Some(min), Some(max)) => {
            row(&mut out, "match (overall) mean", format!("{mean:.1}%"));
            row(&mut out, "match (overall) min", format!("{min}%"));
            row(&mut out, "match (overall) max", format!("{max}%"));
        }
        _ => row(&mut out, "match (overall)", "n/a"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::compute_match;
    use proptest::prelude::*;

    /// Independent reader for rendered reports: label -> value.
    fn reparse(report: &str) -> Vec<(String, String)> {
        report
            .lines()
            .map(|l| {
                let (label, value) = l.split_at(LABEL_WIDTH);
                (label.trim_end().to_string(), value.trim().to_string())
            })
            .collect()
    }

    fn counts_from(rows: &[(String, String)]) -> (EvalCounts, u32, u32) {
        let num = |i: usize| rows[i].1.parse::<usize>().unwrap();
        let cats = |start: usize| CategoryCounts {
            went_well: num(start + 1),
            did_not_go_well: num(start + 2),
            unclear_neutral: num(start + 3),
            irrelevant: num(start + 4),
        };
        let pct = |i: usize| rows[i].1.trim_end_matches('%').parse::<u32>().unwrap();
        let c = EvalCounts {
            n: num(0),
            correct: cats(1),
            incorrect: cats(6),
            missing: cats(11),
            duplicated: cats(16),
        };
        (c, pct(21), pct(22))
    }

    fn prompt2_shape() -> EvalCounts {
        EvalCounts {
            n: 200,
            correct: CategoryCounts::new(47, 78, 23, 0),
            incorrect: CategoryCounts::new(17, 17, 4, 7),
            missing: CategoryCounts::new(2, 4, 1, 0),
            duplicated: CategoryCounts::default(),
        }
    }

    #[test]
    fn duplicated_row_is_zero_for_prompt2_shape() {
        let c = prompt2_shape();
        let report = render_report(&c, &compute_match(&c).unwrap());
        let rows = reparse(&report);
        assert_eq!(rows[16], ("duplicated".to_string(), "0".to_string()));
        assert_eq!(rows[21], ("match (simple)".to_string(), "77%".to_string()));
        assert_eq!(rows[22], ("match (overall)".to_string(), "74%".to_string()));
    }

    #[test]
    fn zeroed_counts() {
        let c = EvalCounts {
            n: 10,
            incorrect: CategoryCounts::new(10, 0, 0, 0),
            ..Default::default()
        };
        let report = render_report(&c, &compute_match(&c).unwrap());
        let (back, simple, overall) = counts_from(&reparse(&report));
        assert_eq!(back, c);
        assert_eq!((simple, overall), (0, 0));
    }

    proptest! {
        #[test]
        fn report_reparses(parts in prop::collection::vec(0usize..300, 16)) {
            let cc = |i: usize| CategoryCounts::new(parts[i], parts[i + 1], parts[i + 2], parts[i + 3]);
            let mut c = EvalCounts { n: 0, correct: cc(0), incorrect: cc(4), missing: cc(8), duplicated: cc(12) };
            c.n = c.n_correct() + c.n_incorrect() + c.n_missing() + c.n_duplicated();
            prop_assume!(c.n_missing() < c.n);
            let m = compute_match(&c).unwrap();
            let (back, simple, overall) = counts_from(&reparse(&render_report(&c, &m)));
            prop_assert_eq!(back, c);
            prop_assert_eq!((simple, overall), (m.match_simple, m.match_overall));
        }
    }
}
