//! Chunked augmented generation (CAG) engine.
//!
//! Small-context models can't take a whole document in one call. This crate
//! implements the workaround end to end: split the input into chunks that fit
//! the model's context window, run one isolated session per chunk, and stitch
//! the responses back together — once (`sequential`) or repeatedly until the
//! combined output itself fits a token budget (`recursive`).
//!
//! The pieces are usable on their own:
//!
//! - [`splitter`] — hierarchical separator-based text splitting with overlap
//! - [`cwq`] — context-window quotient: sizing texts against a token window
//! - [`backend`] — the session/generation abstraction plus mock and HTTP backends
//! - [`pipeline`] — sequential and recursive chunked generation
//! - [`metrics`] — ROUGE-N/L/S and compression ratio
//! - [`corpus`] — article corpus loading and size statistics
//! - [`bench`] — batch benchmark runs and CSV/JSON reports

pub mod backend;
pub mod bench;
pub mod corpus;
pub mod cwq;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod splitter;

pub use backend::{Backend, BackendError, BackendSession, SessionLimits, SessionState};
pub use cwq::{categorize, compute_cwq, estimate_tokens, CwqCategory, CwqParams, CwqValue};
pub use error::{InvalidConfig, InvalidTemplate};
pub use pipeline::{
    generate_recursive, generate_sequential, GenerationConfig, GenerationResult, PipelineError,
    PromptTemplate,
};
pub use splitter::{split_text, Chunk, SplitConfig};
