use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CategoryCounts;
use crate::domain::{validate_comment_text, Category, CommentId};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub id: CommentId,
    pub text: String,
    pub gold: Category,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
}

#[derive(Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tallies(&self) -> CategoryCounts {
        let mut t = CategoryCounts::default();
        for item in &self.items {
            t.add(item.gold, 1);
        }
        t
    }

    pub fn gold(&self, id: &CommentId) -> Option<Category> {
        self.items.iter().find(|i| &i.id == id).map(|i| i.gold)
    }

    pub fn inputs(&self) -> Vec<(CommentId, String)> {
        self.items.iter().map(|i| (i.id.clone(), i.text.clone())).collect()
    }

    /// Parses line-delimited JSON records with `id`, `text` and `label`.
    /// Blank lines are skipped; a file without records is an error.
    pub fn parse(src: &str) -> Result<Self, DatasetError> {
        let mut items = Vec::new();
        let mut ids = HashSet::new();
        for (i, line) in src.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let gold = rec.label.parse::<Category>().map_err(|_| DatasetError::UnknownLabel {
                line: line_no,
                label: rec.label.clone(),
            })?;
            let text = validate_comment_text(&rec.text).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: format!("invalid text: {e}"),
            })?;
            if rec.id.trim().is_empty() {
                return Err(DatasetError::Parse {
                    line: line_no,
                    message: "empty id".into(),
                });
            }
            if !ids.insert(rec.id.clone()) {
                return Err(DatasetError::DuplicateId {
                    line: line_no,
                    id: rec.id,
                });
            }
            items.push(LabeledItem {
                id: CommentId(rec.id),
                text,
                gold,
            });
        }
        if items.is_empty() {
            return Err(DatasetError::Parse {
                line: 1,
                message: "dataset contains no records".into(),
            });
        }
        Ok(Self { items })
    }
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, DatasetError> {
    let src = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    LabeledDataset::parse(&src)
}
