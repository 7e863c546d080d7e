//! Error types shared across modules.

use thiserror::Error;

/// A configuration value failed validation. `field` names the offending
/// field (or "budget" for the cross-field token-budget check) so callers can
/// report precisely what to fix.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid config: {field}: {message}")]
pub struct InvalidConfig {
    pub field: String,
    pub message: String,
}

impl InvalidConfig {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A prompt template failed validation (the `{{chunk}}` placeholder must
/// appear exactly once).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid template: {0}")]
pub struct InvalidTemplate(pub String);
