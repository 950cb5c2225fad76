//! Benchmark harness: labeled datasets, scoring against gold labels, match
//! metrics and plain-text reports.

pub mod bench;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod score;

use serde::{Deserialize, Serialize};

pub use bench::{run_benchmark, BenchError, BenchmarkOutcome, BenchmarkSummary, RunResult, Scored};
pub use dataset::{load_dataset, DatasetError, LabeledDataset, LabeledItem};
pub use metrics::{compute_match, percent_half_up, Metrics, MetricsError};
pub use report::{render_benchmark, render_report};
pub use score::{bucket_for, score, Bucket, EvalCounts, ScoreError};

use crate::domain::Category;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub went_well: usize,
    pub did_not_go_well: usize,
    pub unclear_neutral: usize,
    pub irrelevant: usize,
}

impl CategoryCounts {
    pub fn new(went_well: usize, did_not_go_well: usize, unclear_neutral: usize, irrelevant: usize) -> Self {
        Self {
            went_well,
            did_not_go_well,
            unclear_neutral,
            irrelevant,
        }
    }

    pub fn get(&self, c: Category) -> usize {
        match c {
            Category::WentWell => self.went_well,
            Category::DidNotGoWell => self.did_not_go_well,
            Category::UnclearNeutral => self.unclear_neutral,
            Category::Irrelevant => self.irrelevant,
        }
    }

    pub fn add(&mut self, c: Category, k: usize) {
        match c {
            Category::WentWell => self.went_well += k,
            Category::DidNotGoWell => self.did_not_go_well += k,
            Category::UnclearNeutral => self.unclear_neutral += k,
            Category::Irrelevant => self.irrelevant += k,
        }
    }

    pub fn total(&self) -> usize {
        self.went_well + self.did_not_go_well + self.unclear_neutral + self.irrelevant
    }
}
