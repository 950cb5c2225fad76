use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::LabeledDataset;
use super::CategoryCounts;
use crate::classify::Allocation;
use crate::domain::{Category, CommentId};

/// Per-gold-category outcome counts of one classification run.
///
/// Every item lands in exactly one bucket, so the four totals add up to `n`
/// and, per category, to the gold category size.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub n: usize,
    pub correct: CategoryCounts,
    pub incorrect: CategoryCounts,
    pub missing: CategoryCounts,
    pub duplicated: CategoryCounts,
}

impl EvalCounts {
    pub fn n_correct(&self) -> usize {
        self.correct.total()
    }

    pub fn n_incorrect(&self) -> usize {
        self.incorrect.total()
    }

    pub fn n_missing(&self) -> usize {
        self.missing.total()
    }

    pub fn n_duplicated(&self) -> usize {
        self.duplicated.total()
    }

    /// Items of gold category `c` across all four buckets.
    pub fn gold_size(&self, c: Category) -> usize {
        self.correct.get(c) + self.incorrect.get(c) + self.missing.get(c) + self.duplicated.get(c)
    }

    pub fn is_partition(&self) -> bool {
        self.n_correct() + self.n_incorrect() + self.n_missing() + self.n_duplicated() == self.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("allocation mentions comment {0} which is not in the dataset")]
    UnknownCommentId(CommentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Correct,
    Incorrect,
    Missing,
    Duplicated,
}

/// Buckets one item given the reconciled allocation.
pub fn bucket_for(allocation: &Allocation, id: &CommentId, gold: Category) -> Bucket {
    if allocation.is_duplicate(id) {
        return Bucket::Duplicated;
    }
    match allocation.category_of(id) {
        Some(c) if c == gold => Bucket::Correct,
        Some(_) => Bucket::Incorrect,
        None => Bucket::Missing,
    }
}

/// Scores an allocation against gold labels. Dataset items the allocation
/// does not mention at all count as missing.
pub fn score(allocation: &Allocation, gold: &LabeledDataset) -> Result<EvalCounts, ScoreError> {
    let known: HashSet<&CommentId> = gold.items.iter().map(|i| &i.id).collect();
    let mentioned = allocation
        .allocated
        .values()
        .flatten()
        .chain(&allocation.manual_queue)
        .chain(allocation.duplicates.iter().map(|(id, _)| id));
    for id in mentioned {
        if !known.contains(id) {
            return Err(ScoreError::UnknownCommentId(id.clone()));
        }
    }

    let mut counts = EvalCounts {
        n: gold.len(),
        ..Default::default()
    };
    for item in &gold.items {
        let bucket = match bucket_for(allocation, &item.id, item.gold) {
            Bucket::Correct => &mut counts.correct,
            Bucket::Incorrect => &mut counts.incorrect,
            Bucket::Missing => &mut counts.missing,
            Bucket::Duplicated => &mut counts.duplicated,
        };
        bucket.add(item.gold, 1);
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::reconcile;
    use crate::classify::RawAllocation;
    use crate::eval::dataset::LabeledItem;

    fn dataset(golds: &[Category]) -> LabeledDataset {
        LabeledDataset {
            items: golds
                .iter()
                .enumerate()
                .map(|(i, g)| LabeledItem {
                    id: CommentId(format!("c{i}")),
                    text: format!("t{i}"),
                    gold: *g,
                })
                .collect(),
        }
    }

    #[test]
    fn all_correct() {
        let golds = [Category::WentWell, Category::DidNotGoWell, Category::Irrelevant];
        let ds = dataset(&golds);
        let raw = RawAllocation {
            assignments: ds.items.iter().map(|i| (i.id.clone(), i.gold)).collect(),
            ..Default::default()
        };
        let ids: Vec<_> = ds.items.iter().map(|i| i.id.clone()).collect();
        let counts = score(&reconcile(&ids, &raw), &ds).unwrap();
        assert_eq!(counts.n_correct(), 3);
        assert_eq!(counts.n_incorrect() + counts.n_missing() + counts.n_duplicated(), 0);
    }

    #[test]
    fn went_well_row_of_a_two_heading_run() {
        // 66 went-well items: 34 allocated correctly, 1 put under the wrong heading, 31 dropped
        let ds = dataset(&[Category::WentWell; 66]);
        let ids: Vec<_> = ds.items.iter().map(|i| i.id.clone()).collect();
        let mut assignments: Vec<_> = ids[..34].iter().map(|id| (id.clone(), Category::WentWell)).collect();
        assignments.push((ids[34].clone(), Category::DidNotGoWell));
        let raw = RawAllocation {
            assignments,
            ..Default::default()
        };
        let counts = score(&reconcile(&ids, &raw), &ds).unwrap();
        let p = Category::WentWell;
        assert_eq!(
            (counts.correct.get(p), counts.incorrect.get(p), counts.missing.get(p)),
            (34, 1, 31)
        );
        assert_eq!(counts.gold_size(p), 66);
        assert!(counts.is_partition());
    }

    #[test]
    fn unknown_id_rejected() {
        let ds = dataset(&[Category::WentWell]);
        let mut alloc = Allocation::default();
        alloc.manual_queue.push(CommentId::new("ghost"));
        assert_eq!(score(&alloc, &ds), Err(ScoreError::UnknownCommentId(CommentId::new("ghost"))));
    }

    #[test]
    fn unmentioned_items_are_missing() {
        let ds = dataset(&[Category::WentWell, Category::DidNotGoWell]);
        let counts = score(&Allocation::default(), &ds).unwrap();
        assert_eq!(counts.n_missing(), 2);
    }
}
