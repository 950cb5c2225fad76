//! Board operations on top of the record store. Every board mutation is a
//! compare-and-set on the board's stored version.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use parking_lot::Mutex;
use retro_core::classify::{classify_board, PipelineError, PromptError, TemplateId};
use retro_core::domain::{
    project_name_key, validate_short_text, ActionId, ActionItem, Board, BoardId, BoardStatus, Category, Column,
    Comment, CommentId, CommentState, GroupId, KanbanItem, KanbanStatus, Project, ProjectId,
};
use retro_core::grouping::{self, DEFAULT_SUGGESTION_THRESHOLD};
use retro_core::Completion;
use retro_gateway::{summarize_sprint, SummaryError};
use retro_store::{Expect, Kind, Store, StoreError, Write};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::views::*;

type Result<T> = std::result::Result<T, ServiceError>;

/// Upper bound on internal compare-and-set retries for requests that did not
/// pin a version with If-Match.
const MAX_CAS_ATTEMPTS: usize = 64;

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub event: String,
    pub board_id: String,
    pub comment_id: String,
    pub text: String,
    pub at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KanbanItemInput {
    pub title: String,
    pub status: KanbanStatus,
    #[serde(default)]
    pub story_points: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveTarget {
    Column(Column),
    Discard,
}

impl ResolveTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "went_well" => Ok(ResolveTarget::Column(Column::WentWell)),
            "did_not_go_well" => Ok(ResolveTarget::Column(Column::DidNotGoWell)),
            "discard" => Ok(ResolveTarget::Discard),
            "unclear_neutral" | "irrelevant" => Err(ServiceError::InvalidTarget),
            other => Err(ServiceError::validation("target", format!("unknown target `{other}`"))),
        }
    }
}

pub struct RetroService {
    store: Arc<Store>,
    classifier: Arc<dyn Completion>,
    summarizer: Arc<dyn Completion>,
    summaries: Mutex<HashMap<(String, u64), String>>,
}

impl RetroService {
    pub fn new(store: Arc<Store>, classifier: Arc<dyn Completion>, summarizer: Arc<dyn Completion>) -> Self {
        Self {
            store,
            classifier,
            summarizer,
            summaries: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    // ---- projects ----

    pub fn create_project(&self, name: &str) -> Result<ProjectView> {
        let name = validate_short_text(name).map_err(|e| ServiceError::from_text("name", e))?;
        let project = Project {
            id: ProjectId::generate(),
            name: name.clone(),
            kanban_items: Vec::new(),
        };
        let id = project.id.as_str();
        let writes = vec![
            Write::put(Kind::ProjectName, project_name_key(&name), &id, Expect::Absent)?,
            Write::put(Kind::Project, id, &project, Expect::Absent)?,
            Write::put(Kind::ProjectBoards, id, &Vec::<BoardRef>::new(), Expect::Absent)?,
        ];
        match self.store.commit(writes) {
            Ok(_) => Ok(ProjectView::new(&project, Vec::new())),
            Err(StoreError::VersionConflict {
                kind: Kind::ProjectName,
                ..
            }) => Err(ServiceError::DuplicateProjectName(name)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn list_projects(&self) -> Result<Vec<ProjectView>> {
        let mut out = Vec::new();
        for r in self.store.scan(Kind::Project, |_| true) {
            let p: Project = r.decode()?;
            let (refs, _) = self.board_refs(&p.id)?;
            out.push(ProjectView::new(&p, refs));
        }
        out.sort_by(|a, b| project_order(&a.name, &a.id, &b.name, &b.id));
        Ok(out)
    }

    pub fn get_project(&self, id: &str) -> Result<ProjectView> {
        let (p, _) = self.load_project(id)?;
        let (refs, _) = self.board_refs(&p.id)?;
        Ok(ProjectView::new(&p, refs))
    }

    fn load_project(&self, id: &str) -> Result<(Project, u64)> {
        self.store.get_as(Kind::Project, id)?.ok_or_else(|| ServiceError::NotFound {
            entity: "project",
            id: id.to_string(),
        })
    }

    fn board_refs(&self, project: &ProjectId) -> Result<(Vec<BoardRef>, u64)> {
        Ok(self
            .store
            .get_as(Kind::ProjectBoards, project.as_str())?
            .unwrap_or((Vec::new(), 0)))
    }

    /// Replaces the kanban items of one sprint.
    pub fn set_kanban(&self, project_id: &str, sprint_number: u32, items: Vec<KanbanItemInput>) -> Result<ProjectView> {
        if sprint_number == 0 {
            return Err(ServiceError::validation("sprint_number", "must be at least 1"));
        }
        let mut validated = Vec::with_capacity(items.len());
        for (i, item) in items.into_iter().enumerate() {
            let title =
                validate_short_text(&item.title).map_err(|e| ServiceError::from_text(&format!("items[{i}].title"), e))?;
            validated.push(KanbanItem {
                title,
                status: item.status,
                story_points: item.story_points,
                sprint_number,
            });
        }
        for _ in 0..MAX_CAS_ATTEMPTS {
            let (mut project, v) = self.load_project(project_id)?;
            project.kanban_items.retain(|k| k.sprint_number != sprint_number);
            project.kanban_items.extend(validated.iter().cloned());
            match self.store.put_checked(Kind::Project, project_id, &project, Expect::Version(v)) {
                Ok(_) => {
                    let (refs, _) = self.board_refs(&project.id)?;
                    return Ok(ProjectView::new(&project, refs));
                }
                Err(StoreError::VersionConflict { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(ServiceError::Storage("project kept changing; giving up".into()))
    }

    // ---- boards ----

    pub fn create_board(&self, project_id: &str, sprint_number: u32) -> Result<BoardView> {
        if sprint_number == 0 {
            return Err(ServiceError::validation("sprint_number", "must be at least 1"));
        }
        let (project, _) = self.load_project(project_id)?;
        for _ in 0..MAX_CAS_ATTEMPTS {
            let (mut refs, v) = self.board_refs(&project.id)?;
            if refs.iter().any(|r| r.sprint_number == sprint_number) {
                return Err(ServiceError::DuplicateSprint(sprint_number));
            }
            let mut board = Board::new(BoardId::generate(), project.id.clone(), sprint_number);
            board.version = 1;
            refs.push(BoardRef {
                board_id: board.id.to_string(),
                sprint_number,
            });
            let expect = if v == 0 { Expect::Absent } else { Expect::Version(v) };
            let writes = vec![
                Write::put(Kind::Board, board.id.as_str(), &board, Expect::Absent)?,
                Write::put(Kind::ProjectBoards, project.id.as_str(), &refs, expect)?,
            ];
            match self.store.commit(writes) {
                Ok(_) => return Ok(BoardView::from(&board)),
                Err(StoreError::VersionConflict { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(ServiceError::Storage("project boards kept changing; giving up".into()))
    }

    pub fn get_board(&self, id: &str) -> Result<BoardView> {
        Ok(BoardView::from(&self.load_board(id)?))
    }

    pub fn load_board(&self, id: &str) -> Result<Board> {
        let (mut board, version): (Board, u64) =
            self.store.get_as(Kind::Board, id)?.ok_or_else(|| ServiceError::NotFound {
                entity: "board",
                id: id.to_string(),
            })?;
        board.version = version;
        Ok(board)
    }

    /// Reads the board, applies `f` and writes it back if nobody else wrote
    /// in between. With `if_match` a stale version fails immediately;
    /// without it the whole read-modify-write is retried up to `attempts`
    /// times.
    fn mutate_board<T>(
        &self,
        id: &str,
        if_match: Option<u64>,
        attempts: usize,
        mut f: impl FnMut(&mut Board, &mut Vec<Write>) -> Result<T>,
    ) -> Result<(T, Board)> {
        let mut current = 0;
        for _ in 0..attempts {
            let base = self.load_board(id)?;
            current = base.version;
            if let Some(expected) = if_match {
                if expected != base.version {
                    return Err(ServiceError::VersionConflict {
                        current_version: base.version,
                    });
                }
            }
            let mut board = base.clone();
            let mut extra = Vec::new();
            let out = f(&mut board, &mut extra)?;
            board.version = base.version + 1;
            let mut writes = vec![Write::put(Kind::Board, id, &board, Expect::Version(base.version))?];
            writes.extend(extra);
            match self.store.commit(writes) {
                Ok(_) => return Ok((out, board)),
                Err(StoreError::VersionConflict { kind: Kind::Board, .. }) => {
                    current = self.store.version(Kind::Board, id).unwrap_or(current);
                    if if_match.is_some() {
                        return Err(ServiceError::VersionConflict {
                            current_version: current,
                        });
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(ServiceError::VersionConflict {
            current_version: current,
        })
    }

    pub fn set_status(&self, board_id: &str, status: BoardStatus, if_match: Option<u64>) -> Result<BoardView> {
        let ((), board) = self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, _| {
            b.status = status;
            Ok(())
        })?;
        Ok(BoardView::from(&board))
    }

    // ---- comments ----

    pub fn submit_comment(&self, board_id: &str, text: &str, if_match: Option<u64>) -> Result<CreatedComment> {
        let text = retro_core::domain::validate_comment_text(text).map_err(|e| ServiceError::from_text("text", e))?;
        let id = CommentId::generate();
        self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, _| {
            if !b.is_active() {
                return Err(ServiceError::BoardInactive);
            }
            b.comments.push(Comment {
                id: id.clone(),
                text: text.clone(),
                board_id: b.id.clone(),
                state: CommentState::Pending,
                created_at: now(),
            });
            Ok(())
        })?;
        Ok(CreatedComment { id: id.to_string() })
    }

    /// Classifies all pending comments. The classifier runs without holding
    /// anything; its result is applied by compare-and-set, retried once if
    /// the board changed meanwhile. Comments that stopped being pending in
    /// the meantime are left alone.
    pub fn trigger_allocation(
        &self,
        board_id: &str,
        template: TemplateId,
        if_match: Option<u64>,
    ) -> Result<AllocationSummary> {
        let snapshot = self.load_board(board_id)?;
        if let Some(expected) = if_match {
            if expected != snapshot.version {
                return Err(ServiceError::VersionConflict {
                    current_version: snapshot.version,
                });
            }
        }
        if !snapshot.is_active() {
            return Err(ServiceError::BoardInactive);
        }
        let pending: Vec<Comment> = snapshot.pending().into_iter().cloned().collect();
        if pending.is_empty() {
            return Err(ServiceError::NoPendingComments);
        }
        let allocation = classify_board(&pending, self.classifier.as_ref(), template).map_err(|e| match e {
            PipelineError::ClassifierUnavailable(err) => ServiceError::ClassifierUnavailable(err.to_string()),
            PipelineError::MalformedResponse(err) => {
                ServiceError::ClassifierUnavailable(format!("unusable classifier response: {err}"))
            }
            PipelineError::EmptyInput => ServiceError::NoPendingComments,
            PipelineError::Prompt(PromptError::InvalidComment { index }) => {
                ServiceError::validation(&format!("comments[{index}]"), "comment cannot be placed in a prompt")
            }
            other => ServiceError::ClassifierUnavailable(other.to_string()),
        })?;

        let duplicate_ids: Vec<CommentId> = allocation.duplicates.iter().map(|(id, _)| id.clone()).collect();
        let (summary, board) = self.mutate_board(board_id, None, 2, |b, _| {
            if !b.is_active() {
                return Err(ServiceError::BoardInactive);
            }
            let mut s = AllocationSummary {
                template: format!("P{}", template.number()),
                went_well: 0,
                did_not_go_well: 0,
                manual_queue: 0,
                duplicates: 0,
                pending_remaining: 0,
                version: 0,
            };
            for (category, ids) in &allocation.allocated {
                for id in ids {
                    if let Some(c) = b.comment_mut(id).filter(|c| c.state == CommentState::Pending) {
                        c.allocate(*category).expect("pending comments can be allocated");
                        match category {
                            Category::WentWell => s.went_well += 1,
                            Category::DidNotGoWell => s.did_not_go_well += 1,
                            _ => unreachable!("routed allocations only name columns"),
                        }
                    }
                }
            }
            for id in &allocation.manual_queue {
                if let Some(c) = b.comment_mut(id).filter(|c| c.state == CommentState::Pending) {
                    c.queue_for_manual().expect("pending comments can be queued");
                    s.manual_queue += 1;
                    if duplicate_ids.contains(id) {
                        s.duplicates += 1;
                    }
                }
            }
            s.pending_remaining = b.pending().len();
            Ok(s)
        })?;
        info!(
            "allocated board {board_id}: {} went well, {} did not go well, {} queued",
            summary.went_well, summary.did_not_go_well, summary.manual_queue
        );
        Ok(AllocationSummary {
            version: board.version,
            ..summary
        })
    }

    pub fn manual_queue(&self, board_id: &str) -> Result<ManualQueueView> {
        Ok(ManualQueueView::from(&self.load_board(board_id)?))
    }

    pub fn resolve_manual(
        &self,
        board_id: &str,
        comment_id: &str,
        target: ResolveTarget,
        if_match: Option<u64>,
    ) -> Result<Resolution> {
        let cid = CommentId::new(comment_id);
        let audit_id = format!("{}-{}", now(), CommentId::generate());
        let (outcome, board) = self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, extra| {
            if !b.is_active() {
                return Err(ServiceError::BoardInactive);
            }
            let board_ref = b.id.to_string();
            let comment = b.comment_mut(&cid).ok_or_else(|| ServiceError::NotFound {
                entity: "comment",
                id: comment_id.to_string(),
            })?;
            if comment.state != CommentState::ManualQueue {
                return Err(ServiceError::NotInQueue(comment_id.to_string()));
            }
            match target {
                ResolveTarget::Column(column) => {
                    comment.allocate(column.category()).expect("queued comments can be allocated");
                    Ok(Some((comment.text.clone(), column)))
                }
                ResolveTarget::Discard => {
                    let event = AuditEvent {
                        event: "comment_discarded".into(),
                        board_id: board_ref.clone(),
                        comment_id: comment_id.to_string(),
                        text: comment.text.clone(),
                        at: now(),
                    };
                    extra.push(Write::put(Kind::Audit, &audit_id, &event, Expect::Absent)?);
                    b.comments.retain(|c| c.id != cid);
                    Ok(None)
                }
            }
        })?;
        Ok(match outcome {
            Some((text, column)) => Resolution::Allocated {
                comment: CommentView {
                    id: comment_id.to_string(),
                    text,
                    group_id: None,
                },
                column,
                version: board.version,
            },
            None => Resolution::Discarded {
                comment_id: comment_id.to_string(),
                version: board.version,
            },
        })
    }

    /// Audit events in chronological order.
    pub fn audit_log(&self) -> Result<Vec<AuditEvent>> {
        let mut events = Vec::new();
        for r in self.store.scan(Kind::Audit, |_| true) {
            events.push(r.decode::<AuditEvent>()?);
        }
        events.sort_by_key(|e| e.at);
        Ok(events)
    }

    // ---- groups ----

    pub fn create_group(
        &self,
        board_id: &str,
        column: Column,
        member_ids: Vec<String>,
        label: Option<String>,
        if_match: Option<u64>,
    ) -> Result<GroupView> {
        let label = match label {
            Some(l) if !l.trim().is_empty() => {
                Some(validate_short_text(&l).map_err(|e| ServiceError::from_text("label", e))?)
            }
            _ => None,
        };
        let members: Vec<CommentId> = member_ids.into_iter().map(CommentId).collect();
        let gid = GroupId::generate();
        let (group, _) = self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, extra| {
            let g = grouping::create_group(b, gid.clone(), column, members.clone(), label.clone())?;
            extra.push(Write::put(Kind::GroupBoard, gid.as_str(), &b.id, Expect::Absent)?);
            Ok(g)
        })?;
        Ok(GroupView::from(&group))
    }

    pub fn dissolve_group(&self, group_id: &str, if_match: Option<u64>) -> Result<GroupView> {
        let gid = GroupId::new(group_id);
        let (board_id, _): (BoardId, u64) = self
            .store
            .get_as(Kind::GroupBoard, group_id)?
            .ok_or_else(|| ServiceError::Group(grouping::GroupError::UnknownGroup(gid.clone())))?;
        let (group, _) = self.mutate_board(board_id.as_str(), if_match, MAX_CAS_ATTEMPTS, |b, extra| {
            let g = grouping::dissolve_group(b, &gid)?;
            extra.push(Write::delete(Kind::GroupBoard, group_id, Expect::Any));
            Ok(g)
        })?;
        Ok(GroupView::from(&group))
    }

    pub fn frequency(&self, board_id: &str) -> Result<FrequencyView> {
        let board = self.load_board(board_id)?;
        let buckets = |col: Column| {
            let comments: Vec<Comment> = board.column(col).into_iter().cloned().collect();
            grouping::sort_by_frequency(&comments)
                .into_iter()
                .map(FrequencyBucketView::from)
                .collect()
        };
        Ok(FrequencyView {
            went_well: buckets(Column::WentWell),
            did_not_go_well: buckets(Column::DidNotGoWell),
        })
    }

    /// Advisory clusters among the ungrouped comments of one column.
    pub fn suggest_groups(&self, board_id: &str, column: Column, threshold: Option<f64>) -> Result<SuggestionView> {
        let threshold = threshold.unwrap_or(DEFAULT_SUGGESTION_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ServiceError::validation("threshold", "must be within [0, 1]"));
        }
        let board = self.load_board(board_id)?;
        let inputs: Vec<(CommentId, String)> = board
            .column(column)
            .into_iter()
            .filter(|c| board.group_of(&c.id).is_none())
            .map(|c| (c.id.clone(), c.text.clone()))
            .collect();
        let groups = grouping::suggest_groups(&inputs, threshold)
            .into_iter()
            .map(|g| g.into_iter().map(|id| id.to_string()).collect())
            .collect();
        Ok(SuggestionView {
            column,
            threshold,
            groups,
        })
    }

    // ---- actions and ratings ----

    pub fn add_action(&self, board_id: &str, text: &str, if_match: Option<u64>) -> Result<ActionItem> {
        let action = ActionItem::new(ActionId::generate(), text).map_err(|e| ServiceError::from_text("text", e))?;
        self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, extra| {
            b.actions.push(action.clone());
            extra.push(Write::put(Kind::ActionBoard, action.id.as_str(), &b.id, Expect::Absent)?);
            Ok(())
        })?;
        Ok(action)
    }

    /// Flips the done flag, or sets it when `done` is given.
    pub fn toggle_action(&self, action_id: &str, done: Option<bool>, if_match: Option<u64>) -> Result<ActionItem> {
        let not_found = || ServiceError::NotFound {
            entity: "action",
            id: action_id.to_string(),
        };
        let (board_id, _): (BoardId, u64) = self.store.get_as(Kind::ActionBoard, action_id)?.ok_or_else(not_found)?;
        let aid = ActionId::new(action_id);
        let (action, _) = self.mutate_board(board_id.as_str(), if_match, MAX_CAS_ATTEMPTS, |b, _| {
            let a = b.actions.iter_mut().find(|a| a.id == aid).ok_or_else(not_found)?;
            a.done = done.unwrap_or(!a.done);
            Ok(a.clone())
        })?;
        Ok(action)
    }

    pub fn rate_board(&self, board_id: &str, rating: i64, if_match: Option<u64>) -> Result<RatingView> {
        if !(1..=5).contains(&rating) {
            return Err(ServiceError::OutOfRange(rating));
        }
        let ((), board) = self.mutate_board(board_id, if_match, MAX_CAS_ATTEMPTS, |b, _| {
            b.ratings.push(rating as u8);
            Ok(())
        })?;
        Ok(RatingView {
            average: board.rating_summary().expect("at least one rating"),
            count: board.ratings.len(),
            version: board.version,
        })
    }

    // ---- dashboard and summaries ----

    /// One entry per project that has a board: its latest sprint's board.
    pub fn dashboard(
        &self,
        query: Option<&str>,
        status: Option<BoardStatus>,
        project: Option<&str>,
    ) -> Result<Vec<DashboardEntry>> {
        let needle = query.map(|q| q.trim().to_lowercase()).filter(|q| !q.is_empty());
        let mut out = Vec::new();
        for r in self.store.scan(Kind::Project, |r| project.is_none_or(|p| r.id == p)) {
            let p: Project = r.decode()?;
            if let Some(n) = &needle {
                if !p.name.to_lowercase().contains(n.as_str()) {
                    continue;
                }
            }
            let (refs, _) = self.board_refs(&p.id)?;
            let Some(latest) = refs.iter().max_by_key(|r| r.sprint_number) else {
                continue;
            };
            let board = self.load_board(&latest.board_id)?;
            if status.is_some_and(|s| s != board.status) {
                continue;
            }
            out.push(DashboardEntry {
                project_id: p.id.to_string(),
                project_name: p.name.clone(),
                board_id: board.id.to_string(),
                status: board.status,
                sprint_number: board.sprint_number,
                rating: board.rating_summary(),
            });
        }
        out.sort_by(|a, b| project_order(&a.project_name, &a.project_id, &b.project_name, &b.project_id));
        Ok(out)
    }

    pub fn sprint_summary(&self, board_id: &str) -> Result<SummaryView> {
        let board = self.load_board(board_id)?;
        let (project, _) = self.load_project(board.project_id.as_str())?;
        let items = project.kanban_for_sprint(board.sprint_number);
        if items.is_empty() {
            return Err(ServiceError::EmptyBacklog(board.sprint_number));
        }
        let mut hasher = DefaultHasher::new();
        items.hash(&mut hasher);
        let key = (board_id.to_string(), hasher.finish());
        let view = |summary: String, cached| SummaryView {
            board_id: board_id.to_string(),
            sprint_number: board.sprint_number,
            summary,
            cached,
        };
        if let Some(hit) = self.summaries.lock().get(&key) {
            return Ok(view(hit.clone(), true));
        }
        let summary =
            summarize_sprint(&items, board.sprint_number, self.summarizer.as_ref()).map_err(|e| match e {
                SummaryError::EmptyBacklog => ServiceError::EmptyBacklog(board.sprint_number),
                SummaryError::Completion(err) => ServiceError::SummaryUnavailable(err),
            })?;
        self.summaries.lock().insert(key, summary.clone());
        Ok(view(summary, false))
    }
}

fn project_order(a_name: &str, a_id: &str, b_name: &str, b_id: &str) -> std::cmp::Ordering {
    a_name
        .to_lowercase()
        .cmp(&b_name.to_lowercase())
        .then_with(|| a_name.cmp(b_name))
        .then_with(|| a_id.cmp(b_id))
}
