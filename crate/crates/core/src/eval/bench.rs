use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::LabeledDataset;
use super::metrics::{compute_match, Metrics};
use super::score::{score, EvalCounts};
use crate::classify::{classify_comments, MatchPolicy, TemplateId};
use crate::completion::Completion;

/// Upper bound on runs executed at the same time.
const MAX_PARALLEL_RUNS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub counts: EvalCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// 1-based run index.
    pub run: usize,
    #[serde(with = "run_result_serde")]
    pub result: Result<Scored, String>,
}

impl RunResult {
    pub fn failed(&self) -> bool {
        self.result.is_err()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub runs: usize,
    pub failed: usize,
    /// Mean of the unrounded overall match, in percent.
    pub match_overall_mean: Option<f64>,
    pub match_overall_min: Option<u32>,
    pub match_overall_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub template: TemplateId,
    pub runs: Vec<RunResult>,
    pub summary: BenchmarkSummary,
}

impl BenchmarkOutcome {
    pub fn any_failed(&self) -> bool {
        self.summary.failed > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("at least one run is required")]
    ZeroRuns,
}

fn run_once(
    dataset: &LabeledDataset,
    classifier: &dyn Completion,
    template: TemplateId,
    policy: &MatchPolicy,
) -> Result<Scored, String> {
    let allocation = classify_comments(&dataset.inputs(), classifier, template, policy).map_err(|e| e.to_string())?;
    let counts = score(&allocation, dataset).map_err(|e| e.to_string())?;
    let metrics = compute_match(&counts).map_err(|e| e.to_string())?;
    Ok(Scored { counts, metrics })
}

/// Classifies and scores the dataset `runs` times. Failed runs are kept in
/// the result, marked with their error. Runs execute concurrently when the
/// classifier allows it; results are always ordered by run index.
pub fn run_benchmark(
    dataset: &LabeledDataset,
    classifier: &dyn Completion,
    template: TemplateId,
    runs: usize,
    policy: &MatchPolicy,
) -> Result<BenchmarkOutcome, BenchError> {
    if runs == 0 {
        return Err(BenchError::ZeroRuns);
    }
    let mut results: Vec<RunResult> = Vec::with_capacity(runs);
    if classifier.supports_concurrency() && runs > 1 {
        let indices: Vec<usize> = (1..=runs).collect();
        for chunk in indices.chunks(MAX_PARALLEL_RUNS) {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&run| s.spawn(move || (run, run_once(dataset, classifier, template, policy))))
                    .collect();
                for h in handles {
                    let (run, result) = h.join().expect("benchmark run panicked");
                    results.push(RunResult { run, result });
                }
            });
        }
    } else {
        for run in 1..=runs {
            results.push(RunResult {
                run,
                result: run_once(dataset, classifier, template, policy),
            });
        }
    }
    results.sort_by_key(|r| r.run);

    let ok: Vec<&Scored> = results.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let summary = BenchmarkSummary {
        runs,
        failed: runs - ok.len(),
        match_overall_mean: (!ok.is_empty())
            .then(|| ok.iter().map(|s| s.metrics.overall_ratio * 100.0).sum::<f64>() / ok.len() as f64),
        match_overall_min: ok.iter().map(|s| s.metrics.match_overall).min(),
        match_overall_max: ok.iter().map(|s| s.metrics.match_overall).max(),
    };
    Ok(BenchmarkOutcome {
        template,
        runs: results,
        summary,
    })
}

mod run_result_serde {
    use super::Scored;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "status", rename_all = "snake_case")]
    enum Repr {
        Ok(Scored),
        Failed { error: String },
    }

    pub fn serialize<S: Serializer>(r: &Result<Scored, String>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Ok(scored) => Repr::Ok(scored.clone()),
            Err(e) => Repr::Failed { error: e.clone() },
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Result<Scored, String>, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Ok(s) => Ok(s),
            Repr::Failed { error } => Err(error),
        })
    }
}
