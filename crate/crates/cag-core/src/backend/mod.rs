//! Backend abstraction: sessions, token accounting, and errors.
//!
//! A backend hands out single-use sessions. The pipeline opens one session
//! per chunk, sends one prompt, and closes it — sessions are never reused
//! across chunks, mirroring how browser-embedded models meter a fixed token
//! window per session. Token accounting uses the ~4-chars-per-token estimate
//! from [`crate::cwq`] throughout; backends that report true counts can
//! override the estimate.

pub mod http;
pub mod mock;

pub use http::HttpBackend;
pub use mock::{InstrumentedBackend, MockBackend};

use thiserror::Error;

use crate::cwq::default_token_estimate;

/// Session parameters and live token state. `tokens_so_far + tokens_left ==
/// max_tokens` at all times; the prompt and the response both consume budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLimits {
    pub max_tokens: usize,
    pub tokens_so_far: usize,
    pub tokens_left: usize,
    pub top_k: usize,
    pub temperature: f64,
}

impl Default for SessionLimits {
    fn default() -> Self {
        Self::new(6144)
    }
}

impl SessionLimits {
    pub fn new(max_tokens: usize) -> Self {
        Self {
            max_tokens,
            tokens_so_far: 0,
            tokens_left: max_tokens,
            top_k: 3,
            temperature: 1.0,
        }
    }

    /// Consume `tokens`, saturating at the window size.
    fn charge(&mut self, tokens: usize) {
        self.tokens_so_far = (self.tokens_so_far + tokens).min(self.max_tokens);
        self.tokens_left = self.max_tokens - self.tokens_so_far;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Open,
    Closed,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    /// The prompt alone would not fit in the session's remaining budget.
    #[error("context overflow: prompt needs {needed} tokens but only {available} remain")]
    ContextOverflow { needed: usize, available: usize },
    /// The backend accepted the prompt but could not produce a response.
    #[error("generation failed: {message}")]
    GenerationFailed { message: String },
    /// No session can be opened at all (endpoint unreachable, backend down).
    #[error("backend unavailable: {message}")]
    BackendUnavailable { message: String },
    /// `generate` was called after `close`.
    #[error("session is closed")]
    SessionClosed,
}

/// A source of single-use generation sessions. Implementations must be safe
/// to share across benchmark worker threads; individual sessions are not.
pub trait Backend: Send + Sync {
    /// The session parameters this backend runs with. Pipeline budget
    /// validation reads `max_tokens` from here.
    fn limits(&self) -> SessionLimits {
        SessionLimits::default()
    }

    /// Open a fresh session. Token state starts at zero regardless of what
    /// the passed-in limits carry.
    fn open_session(&self, limits: SessionLimits) -> Result<Box<dyn BackendSession>, BackendError>;
}

/// One conversation window. `generate` is only legal while open; `close` is
/// idempotent.
pub trait BackendSession: Send {
    fn limits(&self) -> &SessionLimits;
    fn state(&self) -> SessionState;
    fn generate(&mut self, prompt: &str) -> Result<String, BackendError>;
    fn close(&mut self);
}

/// Shared token-accounting state for session implementations.
pub(crate) struct SessionCore {
    limits: SessionLimits,
    state: SessionState,
}

/// What a generate call is allowed to do: the estimated prompt cost and the
/// budget left for the response.
#[derive(Debug)]
pub(crate) struct PromptBudget {
    pub prompt_tokens: usize,
    pub response_allowance: usize,
}

impl SessionCore {
    pub(crate) fn new(mut limits: SessionLimits) -> Self {
        limits.tokens_so_far = 0;
        limits.tokens_left = limits.max_tokens;
        Self {
            limits,
            state: SessionState::Open,
        }
    }

    pub(crate) fn limits(&self) -> &SessionLimits {
        &self.limits
    }

    pub(crate) fn state(&self) -> SessionState {
        self.state
    }

    /// Check the session is open and the prompt fits.
    pub(crate) fn begin(&self, prompt: &str) -> Result<PromptBudget, BackendError> {
        if self.state == SessionState::Closed {
            return Err(BackendError::SessionClosed);
        }
        let prompt_tokens = default_token_estimate(prompt.chars().count());
        if prompt_tokens > self.limits.tokens_left {
            return Err(BackendError::ContextOverflow {
                needed: prompt_tokens,
                available: self.limits.tokens_left,
            });
        }
        Ok(PromptBudget {
            prompt_tokens,
            response_allowance: self.limits.tokens_left - prompt_tokens,
        })
    }

    /// Record consumption for a completed generate call. `overrides` are
    /// backend-reported true counts (prompt, response); estimates fill the
    /// gaps.
    pub(crate) fn finish(
        &mut self,
        budget: &PromptBudget,
        response: &str,
        overrides: (Option<usize>, Option<usize>),
    ) {
        let prompt_tokens = overrides.0.unwrap_or(budget.prompt_tokens);
        let response_tokens = overrides
            .1
            .unwrap_or_else(|| default_token_estimate(response.chars().count()));
        self.limits.charge(prompt_tokens + response_tokens);
    }

    pub(crate) fn close(&mut self) {
        self.state = SessionState::Closed;
    }
}
