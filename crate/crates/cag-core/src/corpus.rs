//! Corpus loading and size statistics.
//!
//! Two layouts are supported: a JSON manifest (an array of objects with
//! `title` and `originalContent` fields, extra fields ignored) or a
//! directory of UTF-8 text files, where each file becomes one record titled
//! by its file stem, in lexicographic filename order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cwq::{categorize, compute_cwq, CwqCategory, CwqParams};

/// One corpus article. Empty content is legal — it's flagged in stats, not
/// rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub title: String,
    #[serde(rename = "originalContent")]
    pub content: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A malformed manifest record; `index` is its position in the array.
    #[error("format error at record {index}: {message}")]
    Format { index: usize, message: String },
    /// A malformed file (or the manifest itself, before records exist).
    #[error("format error in {}: {message}", path.display())]
    FileFormat { path: PathBuf, message: String },
}

/// Load a corpus from a JSON manifest file or a directory of text files.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ArticleRecord>, CorpusError> {
    let path = path.as_ref();
    if path.is_dir() {
        load_dir(path)
    } else {
        load_manifest(path)
    }
}

fn load_manifest(path: &Path) -> Result<Vec<ArticleRecord>, CorpusError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::FileFormat {
        path: path.to_path_buf(),
        message: format!("not valid UTF-8: {e}"),
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CorpusError::FileFormat {
            path: path.to_path_buf(),
            message: format!("not valid JSON: {e}"),
        })?;
    let items = value.as_array().ok_or_else(|| CorpusError::FileFormat {
        path: path.to_path_buf(),
        message: "expected a JSON array of records".to_string(),
    })?;
    let mut records = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let record: ArticleRecord =
            serde_json::from_value(item.clone()).map_err(|e| CorpusError::Format {
                index,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

fn load_dir(path: &Path) -> Result<Vec<ArticleRecord>, CorpusError> {
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    let mut records = Vec::with_capacity(files.len());
    for file in files {
        let bytes = fs::read(&file)?;
        let content = String::from_utf8(bytes).map_err(|e| CorpusError::FileFormat {
            path: file.clone(),
            message: format!("not valid UTF-8: {e}"),
        })?;
        let title = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        records.push(ArticleRecord { title, content });
    }
    Ok(records)
}

/// Corpus-level size statistics. CWQ-derived numbers use the default window
/// parameters; stddev is the population form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    /// Record counts per size category; every category is present, possibly
    /// at zero.
    pub per_category_counts: BTreeMap<CwqCategory, usize>,
    /// Mean content length in characters.
    pub mean_length: f64,
    pub median_cwq: f64,
    pub stddev_cwq: f64,
    /// Records whose content is empty. They count as Small above.
    pub empty_content: usize,
}

pub fn corpus_stats(records: &[ArticleRecord]) -> CorpusStats {
    let params = CwqParams::default();
    let mut per_category_counts: BTreeMap<CwqCategory, usize> =
        CwqCategory::ALL.iter().map(|&c| (c, 0)).collect();
    let mut lengths = Vec::with_capacity(records.len());
    let mut cwqs = Vec::with_capacity(records.len());
    let mut empty_content = 0;
    for record in records {
        let len = record.content.chars().count();
        if len == 0 {
            empty_content += 1;
        }
        let value = compute_cwq(len, &params).expect("default params are valid");
        *per_category_counts
            .get_mut(&categorize(&value))
            .expect("all categories pre-seeded") += 1;
        lengths.push(len);
        cwqs.push(value.as_f64());
    }
    let total = records.len();
    let mean_length = if total == 0 {
        0.0
    } else {
        lengths.iter().sum::<usize>() as f64 / total as f64
    };
    cwqs.sort_by(|a, b| a.partial_cmp(b).expect("cwq values are finite"));
    let median_cwq = match total {
        0 => 0.0,
        n if n % 2 == 1 => cwqs[n / 2],
        n => (cwqs[n / 2 - 1] + cwqs[n / 2]) / 2.0,
    };
    let stddev_cwq = if total == 0 {
        0.0
    } else {
        let mean = cwqs.iter().sum::<f64>() / total as f64;
        let variance = cwqs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / total as f64;
        variance.sqrt()
    };
    CorpusStats {
        total,
        per_category_counts,
        mean_length,
        median_cwq,
        stddev_cwq,
        empty_content,
    }
}
