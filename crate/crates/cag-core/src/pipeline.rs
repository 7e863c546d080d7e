//! Sequential and recursive chunked generation.
//!
//! Both pipelines follow the same per-chunk discipline: split the input,
//! then for each chunk open a fresh session, send one templated prompt,
//! and close the session — even when generation fails. Failed chunks are
//! dropped and recorded (or abort the run in strict mode); the surviving
//! responses are joined with the configured joiner.
//!
//! The sequential pipeline makes exactly one pass. The recursive pipeline
//! repeats passes on its own combined output until the result fits
//! `output_token_limit` or `max_iterations` passes have run; with
//! `max_iterations == 0` it returns the input verbatim. The limit is checked
//! *after* each pass, so even an already-small input gets one full pass
//! unless `precheck` is enabled.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, SessionLimits};
use crate::cwq::default_token_estimate;
use crate::error::{InvalidConfig, InvalidTemplate};
use crate::splitter::{split_text, validate_split_config, SplitConfig};

/// Default prompt the CLI ships with.
pub const DEFAULT_TEMPLATE: &str =
    "Summarize the following text in approximately half its length, preserving key facts:\n\n{{chunk}}";

/// A prompt template containing the `{{chunk}}` placeholder exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    template: String,
}

impl PromptTemplate {
    pub const PLACEHOLDER: &'static str = "{{chunk}}";

    pub fn new(template: impl Into<String>) -> Result<Self, InvalidTemplate> {
        let template = template.into();
        match template.matches(Self::PLACEHOLDER).count() {
            1 => Ok(Self { template }),
            n => Err(InvalidTemplate(format!(
                "placeholder {} must appear exactly once, found {n}",
                Self::PLACEHOLDER
            ))),
        }
    }

    /// The identity template: the prompt is the chunk itself.
    pub fn identity() -> Self {
        Self {
            template: Self::PLACEHOLDER.to_string(),
        }
    }

    pub fn render(&self, chunk: &str) -> String {
        self.template.replacen(Self::PLACEHOLDER, chunk, 1)
    }

    /// Characters the template adds around a chunk.
    pub fn overhead_chars(&self) -> usize {
        self.template.chars().count() - Self::PLACEHOLDER.chars().count()
    }

    /// Token cost of the fixed template text, by the standard estimator.
    pub fn overhead_tokens(&self) -> usize {
        default_token_estimate(self.overhead_chars())
    }

    pub fn as_str(&self) -> &str {
        &self.template
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = InvalidTemplate;
    fn try_from(s: String) -> Result<Self, InvalidTemplate> {
        Self::new(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> String {
        t.template
    }
}

/// Everything a generation run needs besides the input text and backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub split: SplitConfig,
    /// Recursive mode: maximum passes. Zero means "don't touch the input".
    pub max_iterations: usize,
    /// Recursive mode stops once the combined output fits this many tokens.
    pub output_token_limit: usize,
    /// Inserted between per-chunk responses when combining.
    pub joiner: String,
    pub prompt_template: PromptTemplate,
    /// Tokens reserved for the response when validating that a full prompt
    /// fits a session window.
    pub response_reserve_tokens: usize,
    /// Recursive mode: skip the first pass when the input already fits
    /// `output_token_limit`.
    pub precheck: bool,
    /// Abort the run on the first chunk failure instead of dropping the
    /// chunk and carrying on.
    pub strict: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            max_iterations: 10,
            output_token_limit: 6144,
            joiner: "\n".to_string(),
            prompt_template: PromptTemplate::default(),
            response_reserve_tokens: 1024,
            precheck: false,
            strict: false,
        }
    }
}

/// Validate a config against the session window it will run in.
///
/// Beyond per-field checks, the cross-field budget must hold:
/// `estimate(chunk_size) + template overhead + response reserve ≤ max_tokens`,
/// otherwise some full-sized chunk prompt could never fit a session.
pub fn validate_generation_config(
    config: &GenerationConfig,
    limits: &SessionLimits,
) -> Result<(), InvalidConfig> {
    validate_split_config(&config.split)?;
    if config.output_token_limit == 0 {
        return Err(InvalidConfig::new("output_token_limit", "must be positive"));
    }
    if config.response_reserve_tokens == 0 {
        return Err(InvalidConfig::new(
            "response_reserve_tokens",
            "must be positive",
        ));
    }
    let chunk_tokens = default_token_estimate(config.split.chunk_size);
    let overhead = config.prompt_template.overhead_tokens();
    let needed = chunk_tokens + overhead + config.response_reserve_tokens;
    if needed > limits.max_tokens {
        return Err(InvalidConfig::new(
            "budget",
            format!(
                "chunk_size {} (≈{} tokens) + template overhead {} + response reserve {} \
                 exceeds the {}-token window",
                config.split.chunk_size,
                chunk_tokens,
                overhead,
                config.response_reserve_tokens,
                limits.max_tokens
            ),
        ));
    }
    Ok(())
}

/// A chunk that failed generation and was dropped from the combined output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChunkFailure {
    pub iteration: usize,
    pub chunk_index: usize,
    pub error: String,
}

/// Outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationResult {
    pub text: String,
    /// Passes executed (always 1 for sequential).
    pub iterations: usize,
    /// Chunk count of each pass, in order.
    pub chunk_counts: Vec<usize>,
    pub errors: Vec<ChunkFailure>,
    pub duration_ms: u64,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    InvalidConfig(#[from] InvalidConfig),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    /// Strict mode only: the failure that aborted the run.
    #[error("pass {iteration} chunk {chunk_index}: {source}")]
    ChunkFailed {
        iteration: usize,
        chunk_index: usize,
        source: BackendError,
    },
}

/// Why a recursive run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Combined output fit within `output_token_limit`.
    TokenLimit,
    /// `max_iterations` passes ran without fitting.
    IterationCap,
}

/// Structured progress events, one per line when serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PipelineEvent {
    PassStart {
        iteration: usize,
        input_chars: usize,
        chunks: usize,
    },
    ChunkStart {
        iteration: usize,
        chunk_index: usize,
        chars: usize,
    },
    ChunkEnd {
        iteration: usize,
        chunk_index: usize,
        response_chars: usize,
    },
    ChunkError {
        iteration: usize,
        chunk_index: usize,
        error: String,
    },
    PassEnd {
        iteration: usize,
        output_chars: usize,
        output_tokens: usize,
    },
    Termination {
        reason: TerminationReason,
        iterations: usize,
    },
}

/// Receives pipeline events as they happen.
pub trait EventSink {
    fn event(&mut self, event: &PipelineEvent);
}

/// Discards everything; the default sink.
pub struct NullSink;

impl EventSink for NullSink {
    fn event(&mut self, _: &PipelineEvent) {}
}

/// One split-generate-combine pass. Opens and closes one session per chunk;
/// failed chunks are recorded in `errors` and their output dropped.
fn run_pass(
    input: &str,
    iteration: usize,
    config: &GenerationConfig,
    backend: &dyn Backend,
    sink: &mut dyn EventSink,
    errors: &mut Vec<ChunkFailure>,
) -> Result<(String, usize), PipelineError> {
    let chunks = split_text(input, &config.split)?;
    sink.event(&PipelineEvent::PassStart {
        iteration,
        input_chars: input.chars().count(),
        chunks: chunks.len(),
    });
    let mut outputs: Vec<String> = Vec::with_capacity(chunks.len());
    for chunk in &chunks {
        sink.event(&PipelineEvent::ChunkStart {
            iteration,
            chunk_index: chunk.index,
            chars: chunk.length,
        });
        let mut session = backend
            .open_session(backend.limits())
            .map_err(|e| PipelineError::BackendUnavailable(e.to_string()))?;
        let prompt = config.prompt_template.render(&chunk.text);
        let outcome = session.generate(&prompt);
        session.close();
        match outcome {
            Ok(response) => {
                sink.event(&PipelineEvent::ChunkEnd {
                    iteration,
                    chunk_index: chunk.index,
                    response_chars: response.chars().count(),
                });
                outputs.push(response);
            }
            Err(e) => {
                sink.event(&PipelineEvent::ChunkError {
                    iteration,
                    chunk_index: chunk.index,
                    error: e.to_string(),
                });
                errors.push(ChunkFailure {
                    iteration,
                    chunk_index: chunk.index,
                    error: e.to_string(),
                });
                if config.strict {
                    return Err(PipelineError::ChunkFailed {
                        iteration,
                        chunk_index: chunk.index,
                        source: e,
                    });
                }
            }
        }
    }
    let combined = outputs.join(&config.joiner);
    sink.event(&PipelineEvent::PassEnd {
        iteration,
        output_chars: combined.chars().count(),
        output_tokens: default_token_estimate(combined.chars().count()),
    });
    Ok((combined, chunks.len()))
}

/// Single-pass chunked generation: split, generate per chunk, combine.
pub fn generate_sequential(
    input: &str,
    config: &GenerationConfig,
    backend: &dyn Backend,
) -> Result<GenerationResult, PipelineError> {
    generate_sequential_with_events(input, config, backend, &mut NullSink)
}

pub fn generate_sequential_with_events(
    input: &str,
    config: &GenerationConfig,
    backend: &dyn Backend,
    sink: &mut dyn EventSink,
) -> Result<GenerationResult, PipelineError> {
    validate_generation_config(config, &backend.limits())?;
    let start = Instant::now();
    let mut errors = Vec::new();
    let (text, chunk_count) = run_pass(input, 0, config, backend, sink, &mut errors)?;
    Ok(GenerationResult {
        text,
        iterations: 1,
        chunk_counts: vec![chunk_count],
        errors,
        duration_ms: start.elapsed().as_millis() as u64,
    })
}

/// Multi-pass generation: re-split and re-process the combined output until
/// it fits `output_token_limit` or `max_iterations` passes have run.
pub fn generate_recursive(
    input: &str,
    config: &GenerationConfig,
    backend: &dyn Backend,
) -> Result<GenerationResult, PipelineError> {
    generate_recursive_with_events(input, config, backend, &mut NullSink)
}

pub fn generate_recursive_with_events(
    input: &str,
    config: &GenerationConfig,
    backend: &dyn Backend,
    sink: &mut dyn EventSink,
) -> Result<GenerationResult, PipelineError> {
    validate_generation_config(config, &backend.limits())?;
    let start = Instant::now();
    let fits = |text: &str| {
        default_token_estimate(text.chars().count()) <= config.output_token_limit
    };
    let mut current = input.to_string();
    let mut iterations = 0;
    let mut chunk_counts = Vec::new();
    let mut errors = Vec::new();

    let reason = if config.precheck && fits(&current) {
        TerminationReason::TokenLimit
    } else {
        loop {
            if iterations >= config.max_iterations {
                break TerminationReason::IterationCap;
            }
            let (combined, chunk_count) =
                run_pass(&current, iterations, config, backend, sink, &mut errors)?;
            chunk_counts.push(chunk_count);
            current = combined;
            iterations += 1;
            if fits(&current) {
                break TerminationReason::TokenLimit;
            }
        }
    };
    sink.event(&PipelineEvent::Termination { reason, iterations });
    Ok(GenerationResult {
        text: current,
        iterations,
        chunk_counts,
        errors,
        duration_ms: start.elapsed().as_millis() as u64,
    })
}
