//! Classification pipeline: render prompt, ask the classifier, parse the
//! sectioned answer and reconcile it so that no comment is lost.

pub mod fallback;
pub mod parse;
pub mod prompt;
pub mod reconcile;

use thiserror::Error;

pub use fallback::{fallback_classify, FallbackClassifier, FallbackResponder, Lexicon, LexiconError, RuleTier};
pub use parse::{normalize, parse_allocation, MatchPolicy, ParseError, RawAllocation};
pub use prompt::{build_prompt, heading_phrase, parse_prompt, PromptError, TemplateId, FORMAT_INSTRUCTION};
pub use reconcile::{reconcile, Allocation};

use crate::completion::{Completion, CompletionError};
use crate::domain::{Comment, CommentId, CommentState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("no comments to classify")]
    EmptyInput,
    #[error("comment {0} is not pending")]
    NotPending(CommentId),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("classifier unavailable: {0}")]
    ClassifierUnavailable(#[from] CompletionError),
    #[error("classifier response could not be parsed: {0}")]
    MalformedResponse(#[from] ParseError),
}

/// Runs the full pipeline over `(id, text)` pairs and returns the
/// four-category allocation.
pub fn classify_comments(
    inputs: &[(CommentId, String)],
    classifier: &dyn Completion,
    template: TemplateId,
    policy: &MatchPolicy,
) -> Result<Allocation, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let texts: Vec<&str> = inputs.iter().map(|(_, t)| t.as_str()).collect();
    let prompt = build_prompt(template, &texts)?;
    let response = classifier.complete(&prompt)?;
    let raw = parse_allocation(&response, inputs, policy)?;
    let ids: Vec<CommentId> = inputs.iter().map(|(id, _)| id.clone()).collect();
    Ok(reconcile(&ids, &raw))
}

/// Classifies pending board comments. Neutral and irrelevant comments are
/// routed to the manual queue since the board has no column for them.
pub fn classify_board(
    comments: &[Comment],
    classifier: &dyn Completion,
    template: TemplateId,
) -> Result<Allocation, PipelineError> {
    if let Some(c) = comments.iter().find(|c| c.state != CommentState::Pending) {
        return Err(PipelineError::NotPending(c.id.clone()));
    }
    let inputs: Vec<(CommentId, String)> = comments.iter().map(|c| (c.id.clone(), c.text.clone())).collect();
    classify_comments(&inputs, classifier, template, &MatchPolicy::default()).map(Allocation::route_to_columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoardId, Category};

    fn comments(texts: &[&str]) -> Vec<Comment> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Comment::new(CommentId(format!("c{i}")), BoardId::new("b"), t, i as i64).unwrap())
            .collect()
    }

    struct Down;
    impl Completion for Down {
        fn complete(&self, _: &str) -> Result<String, CompletionError> {
            Err(CompletionError::Timeout { attempts: 3 })
        }
    }

    #[test]
    fn empty_board_is_rejected() {
        assert_eq!(
            classify_board(&[], &FallbackResponder::default(), TemplateId::P3),
            Err(PipelineError::EmptyInput)
        );
    }

    #[test]
    fn two_went_well_one_irrelevant() {
        let cs = comments(&["Code reviews were fast", "Great collaboration", "Hello everyone"]);
        let out = classify_board(&cs, &FallbackResponder::default(), TemplateId::P3).unwrap();
        assert_eq!(out.allocated[&Category::WentWell], vec![cs[0].id.clone(), cs[1].id.clone()]);
        assert_eq!(out.allocated_count(), 2);
        assert_eq!(out.manual_queue, vec![cs[2].id.clone()]);
    }

    #[test]
    fn classifier_errors_propagate() {
        let cs = comments(&["x"]);
        assert!(matches!(
            classify_board(&cs, &Down, TemplateId::P2),
            Err(PipelineError::ClassifierUnavailable(CompletionError::Timeout { .. }))
        ));
    }

    #[test]
    fn non_pending_rejected() {
        let mut cs = comments(&["x"]);
        cs[0].queue_for_manual().unwrap();
        assert!(matches!(
            classify_board(&cs, &FallbackResponder::default(), TemplateId::P2),
            Err(PipelineError::NotPending(_))
        ));
    }
}
