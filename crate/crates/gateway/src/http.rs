//! Live chat-completion client with bounded retries and a total time budget.

use std::io;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use parking_lot::{Condvar, Mutex};
use retro_core::{Completion, CompletionError};
use serde::{Deserialize, Serialize};

use crate::config::GatewayConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

impl ChatRequest {
    pub fn user(model: &str, prompt: &str, temperature: f64) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature,
        }
    }
}

/// Extracts the first choice's message text from a response body.
pub fn extract_content(body: &str) -> Result<String, CompletionError> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| CompletionError::MalformedResponse(format!("invalid JSON body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| CompletionError::MalformedResponse("response has no choices".into()))
}

/// Counting semaphore bounding concurrent requests.
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            max: max.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock();
        while *n >= self.max {
            self.freed.wait(&mut n);
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock() -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(Result<String, CompletionError>),
    Retry(CompletionError),
}

pub struct HttpCompletion {
    config: GatewayConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl HttpCompletion {
    pub fn new(config: GatewayConfig) -> Result<Self, crate::GatewayError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        Ok(Self {
            limiter: Limiter::new(config.max_in_flight),
            config,
            agent,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    fn attempt(&self, body: &ChatRequest, timeout: Duration, attempt: u32) -> Attempt {
        let result = self
            .agent
            .post(&self.config.endpoint())
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Authorization", &format!("Bearer {}", self.config.api_key.expose()))
            .send_json(body);

        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(CompletionError::Timeout { attempts: attempt }),
            Err(ureq::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
                return Attempt::Retry(CompletionError::Timeout { attempts: attempt })
            }
            Err(e) => {
                debug!("completion transport error on attempt {attempt}: {e}");
                return Attempt::Retry(CompletionError::Unavailable(format!("transport error: {}", transport_kind(&e))));
            }
        };

        let status = response.status().as_u16();
        match status {
            200..=299 => match response.body_mut().read_to_string() {
                Ok(text) => Attempt::Done(extract_content(&text)),
                Err(ureq::Error::Timeout(_)) => Attempt::Retry(CompletionError::Timeout { attempts: attempt }),
                Err(e) => Attempt::Done(Err(CompletionError::MalformedResponse(format!(
                    "unreadable body: {}",
                    transport_kind(&e)
                )))),
            },
            401 | 403 => Attempt::Done(Err(CompletionError::AuthFailed)),
            429 => Attempt::Retry(CompletionError::RateLimited { attempts: attempt }),
            500..=599 => Attempt::Retry(CompletionError::Unavailable(format!("server error {status}"))),
            _ => Attempt::Done(Err(CompletionError::Unavailable(format!("unexpected status {status}")))),
        }
    }
}

/// Short description of a transport error without echoing request data.
fn transport_kind(e: &ureq::Error) -> &'static str {
    match e {
        ureq::Error::ConnectionFailed => "connection failed",
        ureq::Error::HostNotFound => "host not found",
        ureq::Error::Io(_) => "i/o error",
        ureq::Error::Timeout(_) => "timeout",
        ureq::Error::Protocol(_) => "protocol error",
        ureq::Error::BadUri(_) => "bad uri",
        _ => "request failed",
    }
}

fn with_attempts(err: CompletionError, attempts: u32) -> CompletionError {
    match err {
        CompletionError::Timeout { .. } => CompletionError::Timeout { attempts },
        CompletionError::RateLimited { .. } => CompletionError::RateLimited { attempts },
        other => other,
    }
}

impl Completion for HttpCompletion {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        if prompt.trim().is_empty() {
            return Err(CompletionError::MalformedResponse("empty prompt".into()));
        }
        let _permit = self.limiter.acquire();
        let body = ChatRequest::user(&self.config.model_name, prompt, self.config.temperature);
        let started = Instant::now();
        let budget = self.config.total_budget();
        let mut attempts = 0u32;
        loop {
            let remaining = budget.saturating_sub(started.elapsed());
            if remaining.is_zero() {
                return Err(CompletionError::Timeout { attempts });
            }
            attempts += 1;
            let timeout = self.config.request_timeout.min(remaining);
            let err = match self.attempt(&body, timeout, attempts) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => err,
            };
            if attempts > self.config.max_retries {
                return Err(with_attempts(err, attempts));
            }
            let backoff = self.config.retry_backoff * 2u32.saturating_pow(attempts - 1);
            let remaining = budget.saturating_sub(started.elapsed());
            if backoff >= remaining {
                return Err(with_attempts(err, attempts));
            }
            warn!("completion attempt {attempts} failed ({err}), retrying in {backoff:?}");
            thread::sleep(backoff);
        }
    }
}
