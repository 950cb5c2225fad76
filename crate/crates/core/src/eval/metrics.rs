use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::score::EvalCounts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// correct / n, whole percent rounded half-up.
    pub match_overall: u32,
    /// correct / (n - missing), whole percent rounded half-up.
    pub match_simple: u32,
    pub overall_ratio: f64,
    pub simple_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("denominator is zero (n = {n}, missing = {missing})")]
    DegenerateDenominator { n: usize, missing: usize },
}

/// `100 * num / den` rounded half-up to an integer, in exact integer
/// arithmetic.
pub fn percent_half_up(num: usize, den: usize) -> u32 {
    assert!(den > 0, "percent of an empty denominator");
    let (num, den) = (num as u64, den as u64);
    ((200 * num + den) / (2 * den)) as u32
}

pub fn compute_match(counts: &EvalCounts) -> Result<Metrics, MetricsError> {
    let n = counts.n;
    let missing = counts.n_missing();
    if n == 0 || missing >= n {
        return Err(MetricsError::DegenerateDenominator { n, missing });
    }
    let correct = counts.n_correct();
    let answered = n - missing;
    Ok(Metrics {
        match_overall: percent_half_up(correct, n),
        match_simple: percent_half_up(correct, answered),
        overall_ratio: correct as f64 / n as f64,
        simple_ratio: correct as f64 / answered as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Category;

    fn counts(correct: usize, n: usize, missing: usize) -> EvalCounts {
        let mut c = EvalCounts {
            n,
            ..Default::default()
        };
        c.correct.add(Category::WentWell, correct);
        c.missing.add(Category::DidNotGoWell, missing);
        c.incorrect.add(Category::UnclearNeutral, n - correct - missing);
        c
    }

    #[test]
    fn published_rows() {
        for (correct, n, missing, overall, simple) in
            [(81, 200, 96, 41, 78), (148, 200, 7, 74, 77), (147, 200, 4, 74, 75)]
        {
            let m = compute_match(&counts(correct, n, missing)).unwrap();
            assert_eq!((m.match_overall, m.match_simple), (overall, simple), "{correct}/{n}/{missing}");
        }
    }

    #[test]
    fn zero_correct() {
        let m = compute_match(&counts(0, 10, 0)).unwrap();
        assert_eq!((m.match_overall, m.match_simple), (0, 0));
    }

    #[test]
    fn degenerate() {
        assert!(compute_match(&counts(0, 5, 5)).is_err());
        assert!(compute_match(&EvalCounts::default()).is_err());
    }

    #[test]
    fn half_up_at_exact_halves() {
        assert_eq!(percent_half_up(81, 200), 41);
        assert_eq!(percent_half_up(147, 200), 74);
        assert_eq!(percent_half_up(1, 8), 13);
        assert_eq!(percent_half_up(1, 3), 33);
    }

    #[test]
    fn simple_never_below_overall() {
        for n in 1..30 {
            for missing in 0..n {
                for correct in 0..=(n - missing) {
                    let m = compute_match(&counts(correct, n, missing)).unwrap();
                    assert!(m.match_simple >= m.match_overall);
                    if missing == 0 {
                        assert_eq!(m.match_simple, m.match_overall);
                    }
                    if correct > 0 {
                        let prev = compute_match(&counts(correct - 1, n, missing)).unwrap();
                        assert!(prev.match_overall <= m.match_overall && prev.match_simple <= m.match_simple);
                    }
                }
            }
        }
    }
}
