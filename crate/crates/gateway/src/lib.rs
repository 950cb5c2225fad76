//! Access to the external language model: a live HTTP client, an offline
//! replay stub, and the rule-based fallback, all behind `Completion`.

pub mod config;
pub mod http;
pub mod replay;
pub mod summary;

use std::env;
use std::path::PathBuf;
use std::str::FromStr;

use retro_core::classify::FallbackResponder;
use retro_core::Completion;
use thiserror::Error;

pub use config::{ApiKey, GatewayConfig};
pub use http::HttpCompletion;
pub use replay::{prompt_hash, ReplayCompletion};
pub use summary::{render_summary_prompt, summarize_sprint, SummaryError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("unknown LLM_MODE `{0}` (expected live, replay or fallback)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Live,
    Replay,
    Fallback,
}

impl FromStr for Mode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            "fallback" => Ok(Mode::Fallback),
            _ => Err(GatewayError::UnknownMode(s.to_string())),
        }
    }
}

pub type SharedCompletion = std::sync::Arc<dyn Completion>;

/// Builds the completion backend selected by `LLM_MODE` (default `live` when
/// `LLM_API_KEY` is set, `fallback` otherwise). Replay reads `LLM_REPLAY_DIR`.
pub fn from_env() -> Result<SharedCompletion, GatewayError> {
    let mode = match env::var("LLM_MODE") {
        Ok(m) => m.parse()?,
        Err(_) if env::var_os("LLM_API_KEY").is_some() => Mode::Live,
        Err(_) => Mode::Fallback,
    };
    build(mode)
}

pub fn build(mode: Mode) -> Result<SharedCompletion, GatewayError> {
    Ok(match mode {
        Mode::Live => std::sync::Arc::new(HttpCompletion::new(GatewayConfig::from_env()?)?),
        Mode::Replay => {
            let dir = env::var_os("LLM_REPLAY_DIR")
                .map(PathBuf::from)
                .ok_or_else(|| GatewayError::Config("LLM_REPLAY_DIR is not set".into()))?;
            std::sync::Arc::new(ReplayCompletion::new(dir))
        }
        Mode::Fallback => std::sync::Arc::new(FallbackResponder::default()),
    })
}
