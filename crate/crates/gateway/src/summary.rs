//! Sprint summaries generated from a project's kanban items.

use std::fmt::Write as _;

use retro_core::domain::{KanbanItem, KanbanStatus};
use retro_core::{Completion, CompletionError};
use thiserror::Error;

pub const SUMMARY_WORD_LIMIT: usize = 150;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummaryError {
    #[error("the sprint has no kanban items")]
    EmptyBacklog,
    #[error(transparent)]
    Completion(#[from] CompletionError),
}

/// Renders the summary request: the sprint's items listed by lane, each
/// with its story points, and the instruction to compare progress with the
/// Sprint backlog.
pub fn render_summary_prompt(items: &[KanbanItem], sprint_number: u32) -> Result<String, SummaryError> {
    if items.is_empty() {
        return Err(SummaryError::EmptyBacklog);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "You are helping a Scrum team prepare the retrospective for sprint {sprint_number}. \
         Below is the team's Kanban board for this sprint, grouped by lane."
    );
    for lane in KanbanStatus::ALL {
        let _ = writeln!(out, "\n{}:", lane.lane_name());
        let mut any = false;
        for item in items.iter().filter(|i| i.status == lane) {
            any = true;
            match item.story_points {
                Some(sp) => writeln!(out, "- {} ({sp} SP)", item.title),
                None => writeln!(out, "- {} (not estimated)", item.title),
            }
            .ok();
        }
        if !any {
            out.push_str("- (none)\n");
        }
    }
    let _ = write!(
        out,
        "\nWrite a short overview of at most {SUMMARY_WORD_LIMIT} words describing the team's progress \
         over the sprint compared with the Sprint backlog, i.e. the work the team planned for this sprint."
    );
    Ok(out)
}

pub fn summarize_sprint(
    items: &[KanbanItem],
    sprint_number: u32,
    completion: &dyn Completion,
) -> Result<String, SummaryError> {
    let prompt = render_summary_prompt(items, sprint_number)?;
    Ok(completion.complete(&prompt)?)
}
