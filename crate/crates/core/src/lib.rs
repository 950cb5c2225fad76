//! Retrospective board core: domain model, comment classification pipeline,
//! grouping helpers and the evaluation harness.

pub mod classify;
pub mod completion;
pub mod domain;
pub mod eval;
pub mod grouping;

pub use completion::{Completion, CompletionError};
