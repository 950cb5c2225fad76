use std::env;
use std::fmt;
use std::time::Duration;

use crate::GatewayError;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// API key wrapper that never prints its contents.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub(crate) fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key: ApiKey,
    pub model_name: String,
    /// Sampling temperature in `[0, 2]`; 0 keeps answers as repeatable as the
    /// backend allows.
    pub temperature: f64,
    pub request_timeout: Duration,
    /// Retries after the first attempt, only for transport errors, 429 and 5xx.
    pub max_retries: u32,
    /// Base delay between attempts, doubled on each retry.
    pub retry_backoff: Duration,
    pub max_in_flight: usize,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>, api_key: ApiKey) -> Self {
        Self {
            base_url: base_url.into(),
            api_key,
            model_name: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            request_timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_backoff: Duration::from_millis(500),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    /// Reads `LLM_BASE_URL`, `LLM_API_KEY`, `LLM_MODEL` and
    /// `LLM_TIMEOUT_SECS`. Only the key is mandatory.
    pub fn from_env() -> Result<Self, GatewayError> {
        let key = env::var("LLM_API_KEY").map_err(|_| GatewayError::Config("LLM_API_KEY is not set".into()))?;
        let mut cfg = Self::new(
            env::var("LLM_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            ApiKey::new(key),
        );
        if let Ok(model) = env::var("LLM_MODEL") {
            cfg.model_name = model;
        }
        if let Ok(secs) = env::var("LLM_TIMEOUT_SECS") {
            let secs: u64 = secs
                .trim()
                .parse()
                .map_err(|_| GatewayError::Config(format!("LLM_TIMEOUT_SECS must be an integer, got `{secs}`")))?;
            cfg.request_timeout = Duration::from_secs(secs);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(GatewayError::Config(format!("base url `{}` is not http(s)", self.base_url)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.request_timeout.is_zero() {
            return Err(GatewayError::Config("request timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    /// Upper bound on the wall time of one `complete` call.
    pub fn total_budget(&self) -> Duration {
        self.request_timeout * (self.max_retries + 1)
    }

    pub(crate) fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}
