use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::parse::RawAllocation;
use crate::domain::{Category, CommentId};

/// Outcome of one classification pass after reconciliation.
///
/// Every input comment ends up either under exactly one category in
/// `allocated` or in `manual_queue`. Comments the classifier put under more
/// than one heading are listed in `duplicates` and are also queued.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub allocated: BTreeMap<Category, Vec<CommentId>>,
    pub manual_queue: Vec<CommentId>,
    pub duplicates: Vec<(CommentId, Vec<Category>)>,
}

impl Allocation {
    pub fn category_of(&self, id: &CommentId) -> Option<Category> {
        self.allocated
            .iter()
            .find(|(_, ids)| ids.contains(id))
            .map(|(c, _)| *c)
    }

    pub fn allocated_count(&self) -> usize {
        self.allocated.values().map(Vec::len).sum()
    }

    pub fn is_duplicate(&self, id: &CommentId) -> bool {
        self.duplicates.iter().any(|(d, _)| d == id)
    }

    /// Moves comments whose category has no board column into the manual
    /// queue.
    pub fn route_to_columns(mut self) -> Allocation {
        for category in [Category::UnclearNeutral, Category::Irrelevant] {
            if let Some(ids) = self.allocated.remove(&category) {
                self.manual_queue.extend(ids);
            }
        }
        self
    }

    /// True when `allocated` and `manual_queue` partition `inputs` and every
    /// duplicate is queued.
    pub fn conserves(&self, inputs: &[CommentId]) -> bool {
        let mut seen = HashSet::new();
        for id in self.allocated.values().flatten().chain(&self.manual_queue) {
            if !seen.insert(id) {
                return false;
            }
        }
        let expected: HashSet<&CommentId> = inputs.iter().collect();
        let queued: HashSet<&CommentId> = self.manual_queue.iter().collect();
        seen == expected && self.duplicates.iter().all(|(id, _)| queued.contains(id))
    }
}

/// Turns raw classifier assignments into an [`Allocation`] that accounts for
/// every input: single assignments are allocated, repeated ones become
/// duplicates and go to the manual queue along with missing comments.
///
/// Assignments naming ids outside `inputs` are ignored.
pub fn reconcile(inputs: &[CommentId], raw: &RawAllocation) -> Allocation {
    let mut per_id: HashMap<&CommentId, Vec<Category>> = HashMap::new();
    for (id, category) in &raw.assignments {
        let cats = per_id.entry(id).or_default();
        if !cats.contains(category) {
            cats.push(*category);
        }
    }

    let mut out = Allocation::default();
    let mut seen = HashSet::new();
    for id in inputs {
        if !seen.insert(id) {
            continue;
        }
        match per_id.get(id).map(Vec::as_slice) {
            Some([category]) => out.allocated.entry(*category).or_default().push(id.clone()),
            Some(cats) if cats.len() > 1 => {
                let mut cats = cats.to_vec();
                cats.sort();
                out.duplicates.push((id.clone(), cats));
                out.manual_queue.push(id.clone());
            }
            _ => out.manual_queue.push(id.clone()),
        }
    }
    out
}
