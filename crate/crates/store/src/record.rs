use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::StoreError;

/// Format version written into every record. Readers refuse newer ones.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Project,
    Board,
    /// Case-folded project name -> project id, for uniqueness.
    ProjectName,
    /// Project id -> ordered list of its board ids.
    ProjectBoards,
    /// Group id -> owning board id.
    GroupBoard,
    /// Action id -> owning board id.
    ActionBoard,
    Audit,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Project,
        Kind::Board,
        Kind::ProjectName,
        Kind::ProjectBoards,
        Kind::GroupBoard,
        Kind::ActionBoard,
        Kind::Audit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Project => "project",
            Kind::Board => "board",
            Kind::ProjectName => "project_name",
            Kind::ProjectBoards => "project_boards",
            Kind::GroupBoard => "group_board",
            Kind::ActionBoard => "action_board",
            Kind::Audit => "audit",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub kind: Kind,
    pub id: String,
    pub version: u64,
    pub schema_version: u32,
    pub value: Value,
}

impl StoredRecord {
    pub fn decode<T: DeserializeOwned>(&self) -> Result<T, StoreError> {
        serde_json::from_value(self.value.clone()).map_err(|e| StoreError::Serialization(e.to_string()))
    }
}

/// Precondition on the stored version of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    /// The key must not exist (create).
    Absent,
    /// The key must exist at exactly this version.
    Version(u64),
    /// No check; used for append-only records.
    Any,
}

impl Expect {
    pub(crate) fn admits(self, current: Option<u64>) -> bool {
        match self {
            Expect::Absent => current.is_none(),
            Expect::Version(v) => current == Some(v),
            Expect::Any => true,
        }
    }

    pub(crate) fn expected(self) -> Option<u64> {
        match self {
            Expect::Version(v) => Some(v),
            _ => None,
        }
    }
}

/// One element of an atomic batch. `value: None` deletes the key.
#[derive(Debug, Clone, PartialEq)]
pub struct Write {
    pub kind: Kind,
    pub id: String,
    pub expect: Expect,
    pub value: Option<Value>,
}

impl Write {
    pub fn put<T: Serialize>(kind: Kind, id: impl Into<String>, value: &T, expect: Expect) -> Result<Self, StoreError> {
        let value = serde_json::to_value(value).map_err(|e| StoreError::Serialization(e.to_string()))?;
        Ok(Self {
            kind,
            id: id.into(),
            expect,
            value: Some(value),
        })
    }

    pub fn delete(kind: Kind, id: impl Into<String>, expect: Expect) -> Self {
        Self {
            kind,
            id: id.into(),
            expect,
            value: None,
        }
    }
}

/// Journal form of a write; a null value is a tombstone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Entry {
    pub kind: Kind,
    pub id: String,
    pub version: u64,
    pub schema_version: u32,
    pub value: Option<Value>,
}
