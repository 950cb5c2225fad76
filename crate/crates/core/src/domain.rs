//! Core vocabulary shared by the pipeline, the board service and the
//! evaluation harness.
//!
//! Comments are anonymous by construction: none of the types below has a
//! field that could identify who wrote a comment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum length of a comment, in characters.
pub const MAX_COMMENT_CHARS: usize = 500;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            /// Fresh random identifier.
            pub fn generate() -> Self {
                Self(uuid::Uuid::new_v4().to_string())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(
    /// Identifier of a single retro comment.
    CommentId
);
id_type!(BoardId);
id_type!(ProjectId);
id_type!(GroupId);
id_type!(ActionId);

/// The four mutually exclusive labels a retro comment can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    WentWell,
    DidNotGoWell,
    UnclearNeutral,
    Irrelevant,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::WentWell,
        Category::DidNotGoWell,
        Category::UnclearNeutral,
        Category::Irrelevant,
    ];

    /// Wire label used in dataset files and JSON payloads.
    pub fn label(self) -> &'static str {
        match self {
            Category::WentWell => "went_well",
            Category::DidNotGoWell => "did_not_go_well",
            Category::UnclearNeutral => "unclear_neutral",
            Category::Irrelevant => "irrelevant",
        }
    }

    /// Dense index in `0..4`, following the order of [`Category::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// The board column this category maps to, if any.
    pub fn column(self) -> Option<Column> {
        match self {
            Category::WentWell => Some(Column::WentWell),
            Category::DidNotGoWell => Some(Column::DidNotGoWell),
            Category::UnclearNeutral | Category::Irrelevant => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category label `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// A comment column on the board. Neutral and irrelevant comments have no
/// column and are resolved by the facilitator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    WentWell,
    DidNotGoWell,
}

impl Column {
    pub fn category(self) -> Category {
        match self {
            Column::WentWell => Category::WentWell,
            Column::DidNotGoWell => Category::DidNotGoWell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("text is empty")]
    EmptyText,
    #[error("text is {len} characters long, the limit is {max}")]
    TooLong { len: usize, max: usize },
}

/// Normalizes raw comment input: line breaks become spaces and the result is
/// trimmed. The result is between 1 and [`MAX_COMMENT_CHARS`] characters.
pub fn validate_comment_text(raw: &str) -> Result<String, ValidationError> {
    let flattened = raw.replace("\r\n", " ").replace(['\n', '\r'], " ");
    let text = flattened.trim();
    if text.is_empty() {
        return Err(ValidationError::EmptyText);
    }
    let len = text.chars().count();
    if len > MAX_COMMENT_CHARS {
        return Err(ValidationError::TooLong {
            len,
            max: MAX_COMMENT_CHARS,
        });
    }
    Ok(text.to_string())
}

/// Non-empty, trimmed, single-line text for action items and kanban titles.
pub fn validate_short_text(raw: &str) -> Result<String, ValidationError> {
    validate_comment_text(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "category", rename_all = "snake_case")]
pub enum CommentState {
    Pending,
    Allocated(Category),
    ManualQueue,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("comment cannot move from {from:?} to {to:?}")]
pub struct InvalidTransition {
    pub from: CommentState,
    pub to: CommentState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: CommentId,
    pub text: String,
    pub board_id: BoardId,
    pub state: CommentState,
    /// UTC seconds.
    pub created_at: i64,
}

impl Comment {
    pub fn new(
        id: CommentId,
        board_id: BoardId,
        raw_text: &str,
        created_at: i64,
    ) -> Result<Self, ValidationError> {
        Ok(Self {
            id,
            text: validate_comment_text(raw_text)?,
            board_id,
            state: CommentState::Pending,
            created_at,
        })
    }

    /// Pending -> Allocated and ManualQueue -> Allocated.
    pub fn allocate(&mut self, category: Category) -> Result<(), InvalidTransition> {
        self.transition(CommentState::Allocated(category))
    }

    /// Pending -> ManualQueue.
    pub fn queue_for_manual(&mut self) -> Result<(), InvalidTransition> {
        self.transition(CommentState::ManualQueue)
    }

    fn transition(&mut self, to: CommentState) -> Result<(), InvalidTransition> {
        let ok = matches!(
            (self.state, to),
            (CommentState::Pending, CommentState::Allocated(_))
                | (CommentState::Pending, CommentState::ManualQueue)
                | (CommentState::ManualQueue, CommentState::Allocated(_))
        );
        if !ok {
            return Err(InvalidTransition {
                from: self.state,
                to,
            });
        }
        self.state = to;
        Ok(())
    }

    pub fn allocated_category(&self) -> Option<Category> {
        match self.state {
            CommentState::Allocated(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoardStatus {
    Active,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionItem {
    pub id: ActionId,
    pub text: String,
    pub done: bool,
}

impl ActionItem {
    pub fn new(id: ActionId, raw_text: &str) -> Result<Self, ValidationError> {
        Ok(Self {
            id,
            text: validate_short_text(raw_text)?,
            done: false,
        })
    }
}

/// Facilitator-created cluster of similar comments inside one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentGroup {
    pub id: GroupId,
    pub column: Column,
    pub member_ids: Vec<CommentId>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Board {
    pub id: BoardId,
    pub project_id: ProjectId,
    pub sprint_number: u32,
    pub status: BoardStatus,
    pub comments: Vec<Comment>,
    pub groups: Vec<CommentGroup>,
    pub actions: Vec<ActionItem>,
    pub ratings: Vec<u8>,
    /// Storage version; bumped by the store on every committed mutation.
    pub version: u64,
}

impl Board {
    pub fn new(id: BoardId, project_id: ProjectId, sprint_number: u32) -> Self {
        Self {
            id,
            project_id,
            sprint_number,
            status: BoardStatus::Active,
            comments: Vec::new(),
            groups: Vec::new(),
            actions: Vec::new(),
            ratings: Vec::new(),
            version: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == BoardStatus::Active
    }

    pub fn comment(&self, id: &CommentId) -> Option<&Comment> {
        self.comments.iter().find(|c| &c.id == id)
    }

    pub fn comment_mut(&mut self, id: &CommentId) -> Option<&mut Comment> {
        self.comments.iter_mut().find(|c| &c.id == id)
    }

    pub fn comments_in_state(&self, pred: impl Fn(&CommentState) -> bool) -> Vec<&Comment> {
        self.comments.iter().filter(|c| pred(&c.state)).collect()
    }

    pub fn pending(&self) -> Vec<&Comment> {
        self.comments_in_state(|s| *s == CommentState::Pending)
    }

    pub fn manual_queue(&self) -> Vec<&Comment> {
        self.comments_in_state(|s| *s == CommentState::ManualQueue)
    }

    pub fn column(&self, column: Column) -> Vec<&Comment> {
        let cat = column.category();
        self.comments_in_state(|s| *s == CommentState::Allocated(cat))
    }

    pub fn group_of(&self, id: &CommentId) -> Option<&CommentGroup> {
        self.groups.iter().find(|g| g.member_ids.contains(id))
    }

    pub fn rating_summary(&self) -> Option<f64> {
        board_rating_summary(&self.ratings)
    }
}

/// Mean of the ratings rounded half-up to one decimal; `None` when empty.
pub fn board_rating_summary(ratings: &[u8]) -> Option<f64> {
    if ratings.is_empty() {
        return None;
    }
    let sum: u64 = ratings.iter().map(|&r| u64::from(r)).sum();
    let n = ratings.len() as u64;
    // tenths = floor(10 * sum / n + 1/2)
    let tenths = (20 * sum + n) / (2 * n);
    Some(tenths as f64 / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KanbanStatus {
    ToDo,
    InProgress,
    Done,
}

impl KanbanStatus {
    pub const ALL: [KanbanStatus; 3] = [KanbanStatus::ToDo, KanbanStatus::InProgress, KanbanStatus::Done];

    pub fn lane_name(self) -> &'static str {
        match self {
            KanbanStatus::ToDo => "To Do",
            KanbanStatus::InProgress => "In Progress",
            KanbanStatus::Done => "Done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KanbanItem {
    pub title: String,
    pub status: KanbanStatus,
    #[serde(default)]
    pub story_points: Option<u32>,
    pub sprint_number: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub name: String,
    #[serde(default)]
    pub kanban_items: Vec<KanbanItem>,
}

impl Project {
    pub fn kanban_for_sprint(&self, sprint_number: u32) -> Vec<KanbanItem> {
        self.kanban_items
            .iter()
            .filter(|k| k.sprint_number == sprint_number)
            .cloned()
            .collect()
    }
}

/// Key used to enforce case-insensitive project name uniqueness.
pub fn project_name_key(name: &str) -> String {
    name.trim().to_lowercase()
}
