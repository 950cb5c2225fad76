use retro_core::domain::ValidationError;
use retro_core::grouping::GroupError;
use retro_core::CompletionError;
use retro_store::StoreError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("a project named `{0}` already exists")]
    DuplicateProjectName(String),
    #[error("sprint {0} already has a board")]
    DuplicateSprint(u32),
    #[error("board is inactive")]
    BoardInactive,
    #[error("board has no pending comments")]
    NoPendingComments,
    #[error("classifier unavailable: {0}")]
    ClassifierUnavailable(String),
    #[error("comment {0} is not in the manual queue")]
    NotInQueue(String),
    #[error("comments can only be resolved to went_well, did_not_go_well or discard")]
    InvalidTarget,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("rating {0} is outside 1..=5")]
    OutOfRange(i64),
    #[error("board was modified concurrently; current version is {current_version}")]
    VersionConflict { current_version: u64 },
    #[error("no kanban items for sprint {0}")]
    EmptyBacklog(u32),
    #[error("summary generation failed: {0}")]
    SummaryUnavailable(CompletionError),
    #[error("storage error: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn validation(field: &str, err: impl ToString) -> Self {
        ServiceError::Validation {
            field: field.to_string(),
            message: err.to_string(),
        }
    }

    pub fn from_text(field: &str, err: ValidationError) -> Self {
        Self::validation(field, err)
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::Validation { .. } => "validation_error",
            ServiceError::DuplicateProjectName(_) => "duplicate_project_name",
            ServiceError::DuplicateSprint(_) => "duplicate_sprint",
            ServiceError::BoardInactive => "board_inactive",
            ServiceError::NoPendingComments => "no_pending_comments",
            ServiceError::ClassifierUnavailable(_) => "classifier_unavailable",
            ServiceError::NotInQueue(_) => "not_in_queue",
            ServiceError::InvalidTarget => "invalid_target",
            ServiceError::Group(g) => match g {
                GroupError::TooFewMembers => "too_few_members",
                GroupError::CrossColumn(_) => "cross_column",
                GroupError::AlreadyGrouped(_) => "already_grouped",
                GroupError::RepeatedMember(_) => "repeated_member",
                GroupError::UnknownGroup(_) => "not_found",
            },
            ServiceError::OutOfRange(_) => "out_of_range",
            ServiceError::VersionConflict { .. } => "version_conflict",
            ServiceError::EmptyBacklog(_) => "empty_backlog",
            ServiceError::SummaryUnavailable(_) => "summary_unavailable",
            ServiceError::Storage(_) => "storage_error",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound { .. } | ServiceError::Group(GroupError::UnknownGroup(_)) => 404,
            ServiceError::Validation { .. }
            | ServiceError::InvalidTarget
            | ServiceError::Group(_)
            | ServiceError::OutOfRange(_)
            | ServiceError::EmptyBacklog(_) => 422,
            ServiceError::DuplicateProjectName(_)
            | ServiceError::DuplicateSprint(_)
            | ServiceError::BoardInactive
            | ServiceError::NoPendingComments
            | ServiceError::NotInQueue(_)
            | ServiceError::VersionConflict { .. } => 409,
            ServiceError::ClassifierUnavailable(_) | ServiceError::SummaryUnavailable(_) => 503,
            ServiceError::Storage(_) => 500,
        }
    }

    /// Field path the error refers to, when there is one.
    pub fn field(&self) -> Option<String> {
        match self {
            ServiceError::Validation { field, .. } => Some(field.clone()),
            ServiceError::DuplicateProjectName(_) => Some("name".into()),
            ServiceError::DuplicateSprint(_) => Some("sprint_number".into()),
            ServiceError::InvalidTarget => Some("target".into()),
            ServiceError::OutOfRange(_) => Some("rating".into()),
            ServiceError::Group(GroupError::TooFewMembers | GroupError::RepeatedMember(_)) => {
                Some("member_ids".into())
            }
            ServiceError::Group(GroupError::CrossColumn(_) | GroupError::AlreadyGrouped(_)) => {
                Some("member_ids".into())
            }
            _ => None,
        }
    }

    pub fn envelope(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            field: self.field(),
            current_version: match self {
                ServiceError::VersionConflict { current_version } => Some(*current_version),
                _ => None,
            },
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        ServiceError::Storage(e.to_string())
    }
}

/// Uniform error envelope returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_version: Option<u64>,
}
