//! Hierarchical text splitting with overlap.
//!
//! Splitting runs in two phases. First the text is cut into *pieces*: split
//! on the first separator in the hierarchy, re-split any piece that still
//! exceeds `chunk_size` with the next separator, and at the final empty
//! separator fall back to fixed character windows. Separators stay attached
//! to the end of the piece they terminate, so the pieces of a separator-level
//! split concatenate back to the original text. Second, consecutive pieces
//! are greedily merged into chunks up to `chunk_size`, and each new chunk
//! starts with the trailing whole pieces of the previous one, up to
//! `chunk_overlap` characters, to preserve context across the boundary.
//!
//! All sizes count Unicode scalar values (`char`s), not bytes.

use serde::{Deserialize, Serialize};

use crate::error::InvalidConfig;

/// Default separator hierarchy: paragraphs, lines, words, then a hard
/// character-window fallback.
pub const DEFAULT_SEPARATORS: [&str; 4] = ["\n\n", "\n", " ", ""];

/// Splitting parameters. `chunk_overlap` must be strictly smaller than
/// `chunk_size`; the separator list must end with the empty fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    #[serde(default = "default_separators")]
    pub separators: Vec<String>,
}

fn default_separators() -> Vec<String> {
    DEFAULT_SEPARATORS.iter().map(|s| s.to_string()).collect()
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            chunk_size: 4096,
            chunk_overlap: 200,
            separators: default_separators(),
        }
    }
}

impl SplitConfig {
    pub fn new(chunk_size: usize, chunk_overlap: usize) -> Self {
        Self {
            chunk_size,
            chunk_overlap,
            ..Self::default()
        }
    }
}

/// One output chunk. `start_offset` is the character index into the source
/// text, known only for chunks that are exactly one fallback window (merged
/// chunks repeat overlap content, so a single source position would lie).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub text: String,
    pub index: usize,
    pub start_offset: Option<usize>,
    /// Length in characters (not bytes).
    pub length: usize,
}

/// Validate a [`SplitConfig`]; every entry point that takes one calls this.
pub fn validate_split_config(config: &SplitConfig) -> Result<(), InvalidConfig> {
    if config.chunk_size == 0 {
        return Err(InvalidConfig::new("chunk_size", "must be positive"));
    }
    if config.chunk_overlap >= config.chunk_size {
        return Err(InvalidConfig::new(
            "chunk_overlap",
            format!(
                "must be smaller than chunk_size ({} >= {})",
                config.chunk_overlap, config.chunk_size
            ),
        ));
    }
    if config.separators.is_empty() {
        return Err(InvalidConfig::new("separators", "must not be empty"));
    }
    if !config.separators.last().unwrap().is_empty() {
        return Err(InvalidConfig::new(
            "separators",
            "must end with the empty fallback separator",
        ));
    }
    Ok(())
}

/// An intermediate piece: a slice of the source plus its character offset.
/// `window` marks pieces produced by the character-window fallback.
#[derive(Debug, Clone, Copy)]
struct Piece<'a> {
    text: &'a str,
    start: usize,
    chars: usize,
    window: bool,
}

/// Split `text` into chunks of at most `chunk_size` characters.
///
/// Deterministic: equal inputs yield equal outputs. Empty input yields an
/// empty vec. Chunk indices are consecutive from zero and chunks appear in
/// source order.
pub fn split_text(text: &str, config: &SplitConfig) -> Result<Vec<Chunk>, InvalidConfig> {
    validate_split_config(config)?;
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut pieces = Vec::new();
    collect_pieces(
        text,
        0,
        text.chars().count(),
        &config.separators,
        config,
        &mut pieces,
    );
    Ok(merge_pieces(&pieces, config))
}

/// Phase 1: recursively cut `text` (whose char count is `chars`, starting at
/// source offset `start`) into pieces no larger than `chunk_size`.
fn collect_pieces<'a>(
    text: &'a str,
    start: usize,
    chars: usize,
    separators: &[String],
    config: &SplitConfig,
    out: &mut Vec<Piece<'a>>,
) {
    if chars <= config.chunk_size {
        out.push(Piece {
            text,
            start,
            chars,
            window: false,
        });
        return;
    }
    // separators is validated to end with "", so `first` always exists until
    // the fallback arm returns.
    let (sep, rest) = separators
        .split_first()
        .expect("separator hierarchy exhausted before fallback");
    if sep.is_empty() {
        cut_windows(text, start, chars, config, out);
        return;
    }
    if !text.contains(sep.as_str()) {
        collect_pieces(text, start, chars, rest, config, out);
        return;
    }
    let mut offset = start;
    for part in text.split_inclusive(sep.as_str()) {
        let part_chars = part.chars().count();
        collect_pieces(part, offset, part_chars, rest, config, out);
        offset += part_chars;
    }
}

/// Fallback: fixed windows of `chunk_size` chars advancing by
/// `chunk_size - chunk_overlap`. The final window ends exactly at the end of
/// the piece and may be shorter.
fn cut_windows<'a>(
    text: &'a str,
    start: usize,
    chars: usize,
    config: &SplitConfig,
    out: &mut Vec<Piece<'a>>,
) {
    let stride = config.chunk_size - config.chunk_overlap;
    // Byte offset of every char boundary, plus the end sentinel, so windows
    // can slice without re-scanning.
    let mut boundaries: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    boundaries.push(text.len());

    let mut pos = 0;
    loop {
        let end = (pos + config.chunk_size).min(chars);
        out.push(Piece {
            text: &text[boundaries[pos]..boundaries[end]],
            start: start + pos,
            chars: end - pos,
            window: true,
        });
        if end == chars {
            break;
        }
        pos += stride;
    }
}

/// Phase 2: greedily pack pieces into chunks, carrying up to `chunk_overlap`
/// trailing characters' worth of whole pieces into the next chunk.
fn merge_pieces(pieces: &[Piece<'_>], config: &SplitConfig) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut window: std::collections::VecDeque<&Piece<'_>> = std::collections::VecDeque::new();
    let mut total = 0usize;

    let emit = |window: &std::collections::VecDeque<&Piece<'_>>,
                    total: usize,
                    chunks: &mut Vec<Chunk>| {
        let mut text = String::with_capacity(window.iter().map(|p| p.text.len()).sum());
        for p in window {
            text.push_str(p.text);
        }
        let start_offset = match (window.len(), window.front()) {
            (1, Some(p)) if p.window => Some(p.start),
            _ => None,
        };
        chunks.push(Chunk {
            text,
            index: chunks.len(),
            start_offset,
            length: total,
        });
    };

    for piece in pieces {
        if total + piece.chars > config.chunk_size && !window.is_empty() {
            emit(&window, total, &mut chunks);
            // Keep a trailing run of whole pieces within the overlap budget,
            // shrinking further if the incoming piece still wouldn't fit.
            while total > config.chunk_overlap
                || (total + piece.chars > config.chunk_size && total > 0)
            {
                let dropped = window.pop_front().expect("window non-empty while total > 0");
                total -= dropped.chars;
            }
        }
        window.push_back(piece);
        total += piece.chars;
    }
    if !window.is_empty() {
        emit(&window, total, &mut chunks);
    }
    chunks
}
