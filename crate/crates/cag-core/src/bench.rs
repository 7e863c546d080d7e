//! Benchmark harness: run a pipeline over a corpus, measure each article,
//! aggregate per size category, and emit CSV or JSON reports.
//!
//! The harness never aborts on a per-article pipeline failure — the failure
//! becomes a `success = false` record. Article order in the output always
//! matches the corpus, whatever the parallelism.

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Backend;
use crate::corpus::ArticleRecord;
use crate::cwq::{categorize, compute_cwq, CwqCategory, CwqParams};
use crate::error::InvalidConfig;
use crate::metrics::{compression_ratio, rouge_all, RougeScores};
use crate::pipeline::{
    generate_recursive, generate_sequential, validate_generation_config, GenerationConfig,
};

/// ROUGE-N order used in reports (alongside L and S).
pub const REPORT_ROUGE_N: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Recursive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::Recursive => "recursive",
        })
    }
}

/// One article's measurements. On failure the output-side numbers take
/// their degenerate values (no output: zero chars, full compression, zero
/// ROUGE) so every field stays self-consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub title: String,
    pub input_chars: usize,
    pub cwq: f64,
    pub category: CwqCategory,
    pub mode: Mode,
    pub chunk_counts: Vec<usize>,
    pub iterations: usize,
    pub output_chars: usize,
    pub compression_ratio: f64,
    /// Output scored against the original article.
    pub rouge: RougeScores,
    pub duration_ms: u64,
    pub success: bool,
    pub error: Option<String>,
}

/// Per-category rollup. Means are over successful records only;
/// `success_rate` is over all records in the category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAggregate {
    pub category: CwqCategory,
    pub count: usize,
    pub mean_compression: f64,
    pub median_compression: f64,
    pub mean_rouge_n_f1: f64,
    pub mean_rouge_l_f1: f64,
    pub mean_rouge_s_f1: f64,
    pub success_rate: f64,
    pub mean_duration_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Run every article through the pipeline and collect one record apiece.
///
/// Up to `parallelism` articles run concurrently (chunks within one article
/// are always sequential — their order is semantic). Results come back in
/// corpus order regardless.
pub fn run_benchmark(
    records: &[ArticleRecord],
    config: &GenerationConfig,
    backend: &dyn Backend,
    mode: Mode,
    parallelism: usize,
) -> Result<Vec<BenchmarkRecord>, InvalidConfig> {
    if parallelism == 0 {
        return Err(InvalidConfig::new("parallelism", "must be at least 1"));
    }
    validate_generation_config(config, &backend.limits())?;
    let slots: Vec<OnceLock<BenchmarkRecord>> =
        records.iter().map(|_| OnceLock::new()).collect();
    let cursor = AtomicUsize::new(0);
    let workers = parallelism.min(records.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(article) = records.get(index) else {
                    break;
                };
                let record = bench_one(article, config, backend, mode);
                slots[index].set(record).expect("each slot is written once");
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("every slot was filled"))
        .collect())
}

fn bench_one(
    article: &ArticleRecord,
    config: &GenerationConfig,
    backend: &dyn Backend,
    mode: Mode,
) -> BenchmarkRecord {
    let input_chars = article.content.chars().count();
    let cwq_value = compute_cwq(input_chars, &CwqParams::default()).expect("default params");
    let cwq = cwq_value.as_f64();
    let category = categorize(&cwq_value);
    let started = Instant::now();
    let outcome = match mode {
        Mode::Sequential => generate_sequential(&article.content, config, backend),
        Mode::Recursive => generate_recursive(&article.content, config, backend),
    };
    let duration_ms = started.elapsed().as_millis() as u64;
    let base = BenchmarkRecord {
        title: article.title.clone(),
        input_chars,
        cwq,
        category,
        mode,
        chunk_counts: Vec::new(),
        iterations: 0,
        output_chars: 0,
        // No output means everything was "compressed away" — except for an
        // empty input, where the ratio is undefined and 0 claims the least.
        compression_ratio: if input_chars == 0 { 0.0 } else { 1.0 },
        rouge: RougeScores::zero(REPORT_ROUGE_N),
        duration_ms,
        success: false,
        error: None,
    };
    match outcome {
        Ok(result) if result.errors.is_empty() => {
            let output_chars = result.text.chars().count();
            BenchmarkRecord {
                chunk_counts: result.chunk_counts,
                iterations: result.iterations,
                output_chars,
                compression_ratio: compression_ratio(input_chars, output_chars).unwrap_or(0.0),
                rouge: rouge_all(&result.text, &article.content, REPORT_ROUGE_N)
                    .expect("REPORT_ROUGE_N is nonzero"),
                success: true,
                ..base
            }
        }
        Ok(result) => {
            let first = &result.errors[0];
            BenchmarkRecord {
                chunk_counts: result.chunk_counts,
                iterations: result.iterations,
                error: Some(format!(
                    "{} chunk(s) failed, first at iteration {} chunk {}: {}",
                    result.errors.len(),
                    first.iteration,
                    first.chunk_index,
                    first.error
                )),
                ..base
            }
        }
        Err(err) => BenchmarkRecord {
            error: Some(err.to_string()),
            ..base
        },
    }
}

/// Roll records up per category, ordered Small → Humongous, skipping
/// categories with no records.
pub fn aggregate_by_category(records: &[BenchmarkRecord]) -> Vec<CategoryAggregate> {
    CwqCategory::ALL
        .iter()
        .filter_map(|&category| {
            let group: Vec<&BenchmarkRecord> =
                records.iter().filter(|r| r.category == category).collect();
            if group.is_empty() {
                return None;
            }
            let successes: Vec<&BenchmarkRecord> =
                group.iter().copied().filter(|r| r.success).collect();
            let mean_of = |value: fn(&BenchmarkRecord) -> f64| {
                if successes.is_empty() {
                    0.0
                } else {
                    successes.iter().map(|r| value(r)).sum::<f64>() / successes.len() as f64
                }
            };
            let mut compressions: Vec<f64> =
                successes.iter().map(|r| r.compression_ratio).collect();
            compressions.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
            let median_compression = match compressions.len() {
                0 => 0.0,
                n if n % 2 == 1 => compressions[n / 2],
                n => (compressions[n / 2 - 1] + compressions[n / 2]) / 2.0,
            };
            Some(CategoryAggregate {
                category,
                count: group.len(),
                mean_compression: mean_of(|r| r.compression_ratio),
                median_compression,
                mean_rouge_n_f1: mean_of(|r| r.rouge.rouge_n.f1),
                mean_rouge_l_f1: mean_of(|r| r.rouge.rouge_l.f1),
                mean_rouge_s_f1: mean_of(|r| r.rouge.rouge_s.f1),
                success_rate: successes.len() as f64 / group.len() as f64,
                mean_duration_ms: mean_of(|r| r.duration_ms as f64),
            })
        })
        .collect()
}

/// Zero every record's duration. Reports are byte-identical across runs
/// except for timings; callers wanting full determinism apply this before
/// aggregating.
pub fn zero_durations(records: &mut [BenchmarkRecord]) {
    for record in records {
        record.duration_ms = 0;
    }
}

/// Write the report. JSON gets a single `{"records": …, "aggregates": …}`
/// object at `path`; CSV gets the per-article table at `path` and the
/// aggregates at the sibling `<stem>.aggregates.csv`.
pub fn emit_report(
    records: &[BenchmarkRecord],
    aggregates: &[CategoryAggregate],
    format: ReportFormat,
    path: &Path,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => {
            let report = serde_json::json!({
                "records": records,
                "aggregates": aggregates,
            });
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            std::fs::write(path, text)?;
        }
        ReportFormat::Csv => {
            write_records_csv(records, path)?;
            write_aggregates_csv(aggregates, &path.with_extension("aggregates.csv"))?;
        }
    }
    Ok(())
}

/// Fixed-point rendering for every real number in CSV output.
fn real(value: f64) -> String {
    format!("{value:.6}")
}

fn write_records_csv(records: &[BenchmarkRecord], path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "title",
        "input_chars",
        "cwq",
        "category",
        "mode",
        "iterations",
        "output_chars",
        "compression_ratio",
        "rouge_n_f1",
        "rouge_l_f1",
        "rouge_s_f1",
        "duration_ms",
        "success",
        "error",
    ])?;
    for r in records {
        writer.write_record([
            r.title.as_str(),
            &r.input_chars.to_string(),
            &real(r.cwq),
            r.category.name(),
            &r.mode.to_string(),
            &r.iterations.to_string(),
            &r.output_chars.to_string(),
            &real(r.compression_ratio),
            &real(r.rouge.rouge_n.f1),
            &real(r.rouge.rouge_l.f1),
            &real(r.rouge.rouge_s.f1),
            &r.duration_ms.to_string(),
            if r.success { "true" } else { "false" },
            r.error.as_deref().unwrap_or(""),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_aggregates_csv(aggregates: &[CategoryAggregate], path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "category",
        "count",
        "mean_compression",
        "median_compression",
        "mean_rouge_n_f1",
        "mean_rouge_l_f1",
        "mean_rouge_s_f1",
        "success_rate",
        "mean_duration_ms",
    ])?;
    for a in aggregates {
        writer.write_record([
            a.category.name(),
            &a.count.to_string(),
            &real(a.mean_compression),
            &real(a.median_compression),
            &real(a.mean_rouge_n_f1),
            &real(a.mean_rouge_l_f1),
            &real(a.mean_rouge_s_f1),
            &real(a.success_rate),
            &real(a.mean_duration_ms),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
