//! The handle through which the pipeline talks to a text classifier.
//!
//! Hosted chat models, recorded transcripts and the offline rule engine all
//! implement [`Completion`]: prompt text in, response text out.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompletionError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("authentication with the completion endpoint failed")]
    AuthFailed,
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("completion backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Completion: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError>;

    /// Whether concurrent `complete` calls are allowed.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

impl<T: Completion + ?Sized> Completion for &T {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        (**self).complete(prompt)
    }

    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}

impl<T: Completion + ?Sized> Completion for std::sync::Arc<T> {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        (**self).complete(prompt)
    }

    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}

impl<T: Completion + ?Sized> Completion for Box<T> {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        (**self).complete(prompt)
    }

    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}
