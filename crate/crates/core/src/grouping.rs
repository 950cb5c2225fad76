//! Grouping of similar comments within a column.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Board, Column, Comment, CommentGroup, CommentId, CommentState, GroupId};

pub const DEFAULT_SUGGESTION_THRESHOLD: f64 = 0.5;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "by", "for", "in", "is", "it", "of", "on", "or", "our",
    "the", "to", "was", "we", "were", "with",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameColor {
    Blue,
    Red,
}

pub fn frame_color(column: Column) -> FrameColor {
    match column {
        Column::WentWell => FrameColor::Blue,
        Column::DidNotGoWell => FrameColor::Red,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("a group needs at least two members")]
    TooFewMembers,
    #[error("comment {0} is not allocated to the group's column")]
    CrossColumn(CommentId),
    #[error("comment {0} already belongs to a group")]
    AlreadyGrouped(CommentId),
    #[error("comment {0} is listed twice")]
    RepeatedMember(CommentId),
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
}

/// Creates a group on `board` after checking membership rules.
pub fn create_group(
    board: &mut Board,
    id: GroupId,
    column: Column,
    member_ids: Vec<CommentId>,
    label: Option<String>,
) -> Result<CommentGroup, GroupError> {
    if member_ids.len() < 2 {
        return Err(GroupError::TooFewMembers);
    }
    let mut seen = HashSet::new();
    for member in &member_ids {
        if !seen.insert(member) {
            return Err(GroupError::RepeatedMember(member.clone()));
        }
        let allocated = board
            .comment(member)
            .is_some_and(|c| c.state == CommentState::Allocated(column.category()));
        if !allocated {
            return Err(GroupError::CrossColumn(member.clone()));
        }
        if board.group_of(member).is_some() {
            return Err(GroupError::AlreadyGrouped(member.clone()));
        }
    }
    let label = label.map(|l| l.trim().to_string()).filter(|l| !l.is_empty());
    let group = CommentGroup {
        id,
        column,
        member_ids,
        label,
    };
    board.groups.push(group.clone());
    Ok(group)
}

/// Removes a group; its members stay on the board ungrouped.
pub fn dissolve_group(board: &mut Board, id: &GroupId) -> Result<CommentGroup, GroupError> {
    let pos = board
        .groups
        .iter()
        .position(|g| &g.id == id)
        .ok_or_else(|| GroupError::UnknownGroup(id.clone()))?;
    Ok(board.groups.remove(pos))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBucket {
    pub text: String,
    pub count: usize,
    pub ids: Vec<CommentId>,
}

/// Lowercase, collapse whitespace and strip trailing punctuation.
pub fn frequency_key(text: &str) -> String {
    let collapsed = crate::classify::normalize(text);
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// Buckets identical comments (after [`frequency_key`]) and orders buckets by
/// descending count, then by the earliest `created_at` in the bucket, then by
/// first appearance.
pub fn sort_by_frequency(comments: &[Comment]) -> Vec<FrequencyBucket> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut buckets: Vec<(FrequencyBucket, i64)> = Vec::new();
    for c in comments {
        let key = frequency_key(&c.text);
        match index.get(&key) {
            Some(&i) => {
                let (bucket, earliest) = &mut buckets[i];
                bucket.count += 1;
                bucket.ids.push(c.id.clone());
                *earliest = (*earliest).min(c.created_at);
            }
            None => {
                index.insert(key.clone(), buckets.len());
                buckets.push((
                    FrequencyBucket {
                        text: key,
                        count: 1,
                        ids: vec![c.id.clone()],
                    },
                    c.created_at,
                ));
            }
        }
    }
    buckets.sort_by(|(a, at), (b, bt)| b.count.cmp(&a.count).then(at.cmp(bt)));
    buckets.into_iter().map(|(b, _)| b).collect()
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Jaccard similarity of content-token sets. Two empty sets score 0.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    jaccard(&content_tokens(a), &content_tokens(b))
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Single-link clusters of comments whose token Jaccard similarity reaches
/// `threshold`. Only clusters with two or more members are returned, in
/// order of their first member; members keep input order.
pub fn suggest_groups(comments: &[(CommentId, String)], threshold: f64) -> Vec<Vec<CommentId>> {
    let tokens: Vec<BTreeSet<String>> = comments.iter().map(|(_, t)| content_tokens(t)).collect();
    let n = comments.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for i in 0..n {
        for j in i + 1..n {
            if jaccard(&tokens[i], &tokens[j]) >= threshold {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut clusters: Vec<(usize, Vec<CommentId>)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for (i, (id, _)) in comments.iter().enumerate() {
        let r = root(&mut parent, i);
        let k = *slot.entry(r).or_insert_with(|| {
            clusters.push((r, Vec::new()));
            clusters.len() - 1
        });
        clusters[k].1.push(id.clone());
    }
    clusters
        .into_iter()
        .map(|(_, ids)| ids)
        .filter(|ids| ids.len() >= 2)
        .collect()
}
