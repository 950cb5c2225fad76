//! Response shapes. Comment views deliberately carry only id, text and group
//! membership: no timestamps, no submitter data, and nothing at all for
//! comments that have not been allocated yet.

use std::collections::BTreeMap;

use retro_core::domain::{
    ActionItem, Board, BoardStatus, Column, CommentGroup, CommentState, KanbanItem, Project,
};
use retro_core::grouping::{frame_color, FrameColor, FrequencyBucket};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedComment {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentView {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    pub id: String,
    pub column: Column,
    pub color: FrameColor,
    pub member_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl From<&CommentGroup> for GroupView {
    fn from(g: &CommentGroup) -> Self {
        Self {
            id: g.id.to_string(),
            column: g.column,
            color: frame_color(g.column),
            member_ids: g.member_ids.iter().map(|m| m.to_string()).collect(),
            label: g.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Columns {
    pub went_well: Vec<CommentView>,
    pub did_not_go_well: Vec<CommentView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardView {
    pub id: String,
    pub project_id: String,
    pub sprint_number: u32,
    pub status: BoardStatus,
    pub version: u64,
    pub pending_count: usize,
    pub manual_queue_count: usize,
    pub columns: Columns,
    pub groups: Vec<GroupView>,
    pub actions: Vec<ActionItem>,
    pub rating: Option<f64>,
    pub rating_count: usize,
}

impl From<&Board> for BoardView {
    fn from(b: &Board) -> Self {
        let column = |col: Column| {
            b.column(col)
                .into_iter()
                .map(|c| CommentView {
                    id: c.id.to_string(),
                    text: c.text.clone(),
                    group_id: b.group_of(&c.id).map(|g| g.id.to_string()),
                })
                .collect()
        };
        Self {
            id: b.id.to_string(),
            project_id: b.project_id.to_string(),
            sprint_number: b.sprint_number,
            status: b.status,
            version: b.version,
            pending_count: b.pending().len(),
            manual_queue_count: b.manual_queue().len(),
            columns: Columns {
                went_well: column(Column::WentWell),
                did_not_go_well: column(Column::DidNotGoWell),
            },
            groups: b.groups.iter().map(GroupView::from).collect(),
            actions: b.actions.clone(),
            rating: b.rating_summary(),
            rating_count: b.ratings.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedComment {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualQueueView {
    pub board_id: String,
    pub version: u64,
    pub comments: Vec<QueuedComment>,
}

impl From<&Board> for ManualQueueView {
    fn from(b: &Board) -> Self {
        Self {
            board_id: b.id.to_string(),
            version: b.version,
            comments: b
                .manual_queue()
                .into_iter()
                .map(|c| QueuedComment {
                    id: c.id.to_string(),
                    text: c.text.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Resolution {
    Allocated { comment: CommentView, column: Column, version: u64 },
    Discarded { comment_id: String, version: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub template: String,
    pub went_well: usize,
    pub did_not_go_well: usize,
    pub manual_queue: usize,
    /// Ids the classifier placed under more than one heading; they are
    /// included in `manual_queue`.
    pub duplicates: usize,
    /// Comments submitted while the classifier was running; still pending.
    pub pending_remaining: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectView {
    pub id: String,
    pub name: String,
    pub kanban_items: Vec<KanbanItem>,
    pub boards: Vec<BoardRef>,
}

impl ProjectView {
    pub fn new(p: &Project, boards: Vec<BoardRef>) -> Self {
        Self {
            id: p.id.to_string(),
            name: p.name.clone(),
            kanban_items: p.kanban_items.clone(),
            boards,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardRef {
    pub board_id: String,
    pub sprint_number: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardEntry {
    pub project_id: String,
    pub project_name: String,
    pub board_id: String,
    pub status: BoardStatus,
    pub sprint_number: u32,
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingView {
    pub average: f64,
    pub count: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyView {
    pub went_well: Vec<FrequencyBucketView>,
    pub did_not_go_well: Vec<FrequencyBucketView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBucketView {
    pub text: String,
    pub count: usize,
    pub ids: Vec<String>,
}

impl From<FrequencyBucket> for FrequencyBucketView {
    fn from(b: FrequencyBucket) -> Self {
        Self {
            text: b.text,
            count: b.count,
            ids: b.ids.into_iter().map(|i| i.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub column: Column,
    pub threshold: f64,
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryView {
    pub board_id: String,
    pub sprint_number: u32,
    pub summary: String,
    pub cached: bool,
}

/// Counts per comment state; used by tests and the allocation summary.
pub fn state_counts(b: &Board) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for c in &b.comments {
        let key = match c.state {
            CommentState::Pending => "pending",
            CommentState::ManualQueue => "manual_queue",
            CommentState::Allocated(_) => "allocated",
        };
        *out.entry(key).or_insert(0) += 1;
    }
    out
}
