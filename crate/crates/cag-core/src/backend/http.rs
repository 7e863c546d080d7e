//! Remote completion backend speaking a minimal JSON-over-HTTP contract.
//!
//! Request: `POST <url>` with body `{"prompt": "...", "max_tokens": N}`,
//! where N is the session budget left after the prompt. Success response:
//! `{"text": "..."}`; backends that meter real tokens may add
//! `"prompt_tokens"` / `"response_tokens"`, which override the char-based
//! estimates. Any non-2xx status is a generation failure carrying the status
//! and body.
//!
//! `open_session` probes the endpoint (a HEAD request; any HTTP status
//! counts as reachable) so an unreachable endpoint surfaces as
//! `BackendUnavailable` before any chunk work starts.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{
    Backend, BackendError, BackendSession, SessionCore, SessionLimits, SessionState,
};

/// Default per-request timeout. The CLI lets `CAG_HTTP_TIMEOUT_SECS`
/// override it.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

pub struct HttpBackend {
    url: String,
    limits: SessionLimits,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>) -> Result<Self, BackendError> {
        Self::with_timeout(url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::BackendUnavailable {
                message: format!("http client construction failed: {e}"),
            })?;
        Ok(Self {
            url: url.into(),
            limits: SessionLimits::default(),
            client,
        })
    }

    pub fn with_limits(mut self, limits: SessionLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
    #[serde(default)]
    prompt_tokens: Option<usize>,
    #[serde(default)]
    response_tokens: Option<usize>,
}

impl Backend for HttpBackend {
    fn limits(&self) -> SessionLimits {
        self.limits.clone()
    }

    fn open_session(&self, limits: SessionLimits) -> Result<Box<dyn BackendSession>, BackendError> {
        // Reachability probe: transport-level failure means no session can
        // be opened; any HTTP response (even 404) means a server is there.
        self.client
            .head(&self.url)
            .send()
            .map_err(|e| BackendError::BackendUnavailable {
                message: format!("{}: {e}", self.url),
            })?;
        Ok(Box::new(HttpSession {
            core: SessionCore::new(limits),
            url: self.url.clone(),
            client: self.client.clone(),
        }))
    }
}

struct HttpSession {
    core: SessionCore,
    url: String,
    client: reqwest::blocking::Client,
}

impl BackendSession for HttpSession {
    fn limits(&self) -> &SessionLimits {
        self.core.limits()
    }

    fn state(&self) -> SessionState {
        self.core.state()
    }

    fn generate(&mut self, prompt: &str) -> Result<String, BackendError> {
        let budget = self.core.begin(prompt)?;
        let response = self
            .client
            .post(&self.url)
            .json(&CompletionRequest {
                prompt,
                max_tokens: budget.response_allowance,
            })
            .send()
            .map_err(|e| BackendError::GenerationFailed {
                message: format!("request failed: {e}"),
            })?;
        let status = response.status();
        let body = response.text().map_err(|e| BackendError::GenerationFailed {
            message: format!("reading response body failed: {e}"),
        })?;
        if !status.is_success() {
            return Err(BackendError::GenerationFailed {
                message: format!("HTTP {}: {}", status.as_u16(), body.trim()),
            });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&body).map_err(|e| BackendError::GenerationFailed {
                message: format!("malformed response body: {e}"),
            })?;
        self.core.finish(
            &budget,
            &parsed.text,
            (parsed.prompt_tokens, parsed.response_tokens),
        );
        Ok(parsed.text)
    }

    fn close(&mut self) {
        self.core.close();
    }
}
