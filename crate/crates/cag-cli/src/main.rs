//! `cag` — chunked augmented generation from the command line.
//!
//! Data goes to stdout (or `--out`); diagnostics and structured progress
//! events go to stderr. Exit codes: 0 success, 1 usage or configuration
//! error, 2 runtime error (IO, corpus, backend, pipeline).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cag_core::backend::http::DEFAULT_TIMEOUT;
use cag_core::backend::{HttpBackend, MockBackend};
use cag_core::bench::{
    aggregate_by_category, emit_report, run_benchmark, zero_durations, Mode, ReportFormat,
};
use cag_core::corpus::{corpus_stats, load_corpus, CorpusError};
use cag_core::cwq::{categorize, compute_cwq, CwqParams, Rational};
use cag_core::metrics::rouge_all;
use cag_core::pipeline::{
    generate_recursive_with_events, generate_sequential_with_events, EventSink, PipelineEvent,
};
use cag_core::{
    split_text, Backend, GenerationConfig, GenerationResult, PipelineError, PromptTemplate,
    SplitConfig,
};

#[derive(Parser)]
#[command(
    name = "cag",
    version,
    about = "Chunked augmented generation: split, classify, run, score, benchmark",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a text file into chunks
    Split(SplitArgs),
    /// Compute context-window quotients for a file or corpus
    Cwq(CwqArgs),
    /// Run a generation pipeline over one input file
    Run(RunArgs),
    /// Score a candidate file against a reference
    Rouge(RougeArgs),
    /// Run a corpus through a backend and write a report
    Bench(BenchArgs),
    /// Inspect a corpus
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Chunk size in characters
    #[arg(long, default_value_t = 4096)]
    size: usize,
    /// Characters carried over between consecutive chunks
    #[arg(long, default_value_t = 200)]
    overlap: usize,
    /// Emit the chunk list as JSON instead of a readable listing
    #[arg(long)]
    json: bool,
    file: PathBuf,
}

#[derive(Args)]
struct CwqArgs {
    /// Either "hist" (histogram mode, requires PATH after it) or the path
    /// itself. A directory or .json path is treated as a corpus.
    #[arg(value_name = "HIST|PATH")]
    first: String,
    #[arg(value_name = "PATH")]
    second: Option<PathBuf>,
}

/// Generation settings shared by `run` and `bench`. Flags override the
/// `--config` file, which overrides built-in defaults.
#[derive(Args)]
struct GenFlags {
    /// Chunk size in characters
    #[arg(long)]
    size: Option<usize>,
    /// Characters carried over between consecutive chunks
    #[arg(long)]
    overlap: Option<usize>,
    /// Recursive mode: maximum number of passes
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Recursive mode: stop once the output fits this many tokens
    #[arg(long)]
    token_limit: Option<usize>,
    /// File holding the prompt template; {{chunk}} marks the insertion point
    #[arg(long)]
    template: Option<PathBuf>,
    /// String inserted between chunk responses
    #[arg(long)]
    joiner: Option<String>,
    /// JSON file mirroring the full generation config
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Sequential)]
    mode: ModeArg,
    /// echo | marker | ratio:R | http:URL
    #[arg(long, default_value = "echo")]
    backend: String,
    #[command(flatten)]
    gen: GenFlags,
    /// Write the output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    file: PathBuf,
}

#[derive(Args)]
struct RougeArgs {
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// n-gram order for the ROUGE-N component
    #[arg(long, default_value_t = 2)]
    n: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// echo | marker | ratio:R | http:URL
    #[arg(long)]
    backend: String,
    /// Report file; CSV mode writes aggregates to <stem>.aggregates.csv next to it
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: FormatArg,
    /// How many articles to process concurrently
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Zero all durations so repeat runs are byte-identical
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    gen: GenFlags,
    corpus: PathBuf,
}

#[derive(Args)]
struct CorpusArgs {
    #[command(subcommand)]
    action: CorpusAction,
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Print corpus statistics as JSON
    Stats { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sequential,
    Recursive,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Sequential => Mode::Sequential,
            ModeArg::Recursive => Mode::Recursive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(format: FormatArg) -> Self {
        match format {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

/// Every failure funnels into one of these so stderr always carries a
/// single-line `error: <kind>: <message>` and the exit code is uniform.
enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Corpus(String),
    Backend(String),
    Pipeline(String),
    Report(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Corpus(_) => "corpus",
            CliError::Backend(_) => "backend",
            CliError::Pipeline(_) => "pipeline",
            CliError::Report(_) => "report",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Config(m)
            | CliError::Io(m)
            | CliError::Corpus(m)
            | CliError::Backend(m)
            | CliError::Pipeline(m)
            | CliError::Report(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        match err {
            CorpusError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Corpus(other.to_string()),
        }
    }
}

/// `load_corpus` with the path stamped onto bare io errors, which otherwise
/// wouldn't say which file was missing.
fn load_corpus_at(path: &Path) -> Result<Vec<cag_core::corpus::ArticleRecord>, CliError> {
    load_corpus(path).map_err(|err| match err {
        CorpusError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        other => other.into(),
    })
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::InvalidConfig(e) => CliError::Config(e.to_string()),
            PipelineError::BackendUnavailable(m) => CliError::Backend(m),
            chunk @ PipelineError::ChunkFailed { .. } => CliError::Pipeline(chunk.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn main() {
    // Rust ignores SIGPIPE, so `cag split big.txt | head` would otherwise
    // panic mid-print. Restore the usual unix disposition: die quietly.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(run_cli());
}

fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}: {}", err.kind(), err.message());
            err.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Split(args) => cmd_split(args),
        Command::Cwq(args) => cmd_cwq(args),
        Command::Run(args) => cmd_run(args),
        Command::Rouge(args) => cmd_rouge(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Corpus(args) => match args.action {
            CorpusAction::Stats { path } => cmd_corpus_stats(&path),
        },
    }
}

fn cmd_split(args: SplitArgs) -> Result<(), CliError> {
    let text = read_file(&args.file)?;
    let config = SplitConfig::new(args.size, args.overlap);
    let chunks = split_text(&text, &config).map_err(|e| CliError::Config(e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&chunks).expect("chunks serialize"));
    } else {
        for chunk in &chunks {
            println!("--- chunk {} ({} chars)", chunk.index, chunk.length);
            println!("{}", chunk.text);
        }
        println!("--- {} chunks", chunks.len());
    }
    Ok(())
}

fn is_corpus_path(path: &Path) -> bool {
    path.is_dir() || path.extension().is_some_and(|ext| ext == "json")
}

fn cmd_cwq(args: CwqArgs) -> Result<(), CliError> {
    let (hist, path) = match (args.first.as_str(), args.second) {
        ("hist", Some(path)) => (true, path),
        ("hist", None) => {
            return Err(CliError::Usage("cwq hist needs a FILE or PATH".to_string()))
        }
        (_, Some(extra)) => {
            return Err(CliError::Usage(format!(
                "unexpected extra argument {:?}",
                extra.display()
            )))
        }
        (file, None) => (false, PathBuf::from(file)),
    };
    let params = CwqParams::default();
    // (title, length) pairs — a single text file is a one-entry corpus.
    let entries: Vec<(String, usize)> = if is_corpus_path(&path) {
        load_corpus_at(&path)?
            .into_iter()
            .map(|r| (r.title, r.content.chars().count()))
            .collect()
    } else {
        vec![(String::new(), read_file(&path)?.chars().count())]
    };
    let values: Vec<(String, f64, &str)> = entries
        .into_iter()
        .map(|(title, len)| {
            let value = compute_cwq(len, &params).map_err(|e| CliError::Config(e.to_string()))?;
            Ok((title, value.as_f64(), categorize(&value).name()))
        })
        .collect::<Result<_, CliError>>()?;
    if hist {
        print_histogram(&values);
    } else {
        for (title, value, category) in &values {
            if title.is_empty() {
                println!("value {value:.6}, category {category}");
            } else {
                println!("{title}: value {value:.6}, category {category}");
            }
        }
    }
    Ok(())
}

fn print_histogram(values: &[(String, f64, &str)]) {
    const BIN: f64 = 0.25;
    if values.is_empty() {
        println!("0 records");
        return;
    }
    let bin_of = |v: f64| (v / BIN) as usize;
    let top = values.iter().map(|(_, v, _)| bin_of(*v)).max().unwrap_or(0);
    let mut bins = vec![0usize; top + 1];
    for (_, value, _) in values {
        bins[bin_of(*value)] += 1;
    }
    for (i, count) in bins.iter().enumerate() {
        println!(
            "{:>5.2}..{:<5.2} {:>5} {}",
            i as f64 * BIN,
            (i + 1) as f64 * BIN,
            count,
            "#".repeat((*count).min(60))
        );
    }
    println!("{} records", values.len());
}

fn build_config(flags: &GenFlags) -> Result<GenerationConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = read_file(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => GenerationConfig::default(),
    };
    if let Some(size) = flags.size {
        config.split.chunk_size = size;
    }
    if let Some(overlap) = flags.overlap {
        config.split.chunk_overlap = overlap;
    }
    if let Some(n) = flags.max_iterations {
        config.max_iterations = n;
    }
    if let Some(limit) = flags.token_limit {
        config.output_token_limit = limit;
    }
    if let Some(joiner) = &flags.joiner {
        config.joiner = joiner.clone();
    }
    if let Some(path) = &flags.template {
        let text = read_file(path)?;
        config.prompt_template =
            PromptTemplate::new(text).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(config)
}

fn http_timeout() -> Result<Duration, CliError> {
    match std::env::var("CAG_HTTP_TIMEOUT_SECS") {
        Ok(value) => value.trim().parse::<u64>().map(Duration::from_secs).map_err(|_| {
            CliError::Config(format!(
                "CAG_HTTP_TIMEOUT_SECS must be a whole number of seconds, got {value:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_TIMEOUT),
        Err(err) => Err(CliError::Config(format!("CAG_HTTP_TIMEOUT_SECS: {err}"))),
    }
}

fn parse_backend(spec: &str) -> Result<Box<dyn Backend>, CliError> {
    if spec == "echo" {
        return Ok(Box::new(MockBackend::echo()));
    }
    if spec == "marker" {
        return Ok(Box::new(MockBackend::marker()));
    }
    if let Some(ratio) = spec.strip_prefix("ratio:") {
        let ratio =
            Rational::parse_decimal(ratio).map_err(|e| CliError::Config(e.to_string()))?;
        let backend = MockBackend::ratio(ratio).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(Box::new(backend));
    }
    let url = if spec.starts_with("http://") || spec.starts_with("https://") {
        Some(spec.to_string())
    } else {
        // The selector form `http:host:port/path`.
        spec.strip_prefix("http:").map(|rest| {
            if rest.starts_with("http://") || rest.starts_with("https://") {
                rest.to_string()
            } else {
                format!("http://{rest}")
            }
        })
    };
    match url {
        Some(url) => {
            let backend = HttpBackend::with_timeout(url, http_timeout()?)
                .map_err(|e| CliError::Backend(e.to_string()))?;
            Ok(Box::new(backend))
        }
        None => Err(CliError::Usage(format!(
            "unknown backend {spec:?} (expected echo, marker, ratio:R, or http:URL)"
        ))),
    }
}

/// Prints each pipeline event as one JSON object per stderr line.
struct JsonLineSink;

impl EventSink for JsonLineSink {
    fn event(&mut self, event: &PipelineEvent) {
        if let Ok(line) = serde_json::to_string(event) {
            eprintln!("{line}");
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let input = read_file(&args.file)?;
    let config = build_config(&args.gen)?;
    let backend = parse_backend(&args.backend)?;
    let mut sink = JsonLineSink;
    let result: GenerationResult = match args.mode {
        ModeArg::Sequential => {
            generate_sequential_with_events(&input, &config, backend.as_ref(), &mut sink)?
        }
        ModeArg::Recursive => {
            generate_recursive_with_events(&input, &config, backend.as_ref(), &mut sink)?
        }
    };
    if !result.errors.is_empty() {
        eprintln!(
            "warning: {} chunk(s) failed and were dropped from the output",
            result.errors.len()
        );
    }
    match &args.out {
        Some(path) => fs::write(path, &result.text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(result.text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_rouge(args: RougeArgs) -> Result<(), CliError> {
    let candidate = read_file(&args.candidate)?;
    let reference = read_file(&args.reference)?;
    let scores = rouge_all(&candidate, &reference, args.n)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&scores).expect("scores serialize"));
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let corpus = load_corpus_at(&args.corpus)?;
    let config = build_config(&args.gen)?;
    let backend = parse_backend(&args.backend)?;
    let mut records = run_benchmark(
        &corpus,
        &config,
        backend.as_ref(),
        args.mode.into(),
        args.parallelism,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    if args.no_timing {
        zero_durations(&mut records);
    }
    let aggregates = aggregate_by_category(&records);
    emit_report(&records, &aggregates, args.format.into(), &args.out)
        .map_err(|e| CliError::Report(e.to_string()))?;
    let failed = records.iter().filter(|r| !r.success).count();
    eprintln!(
        "wrote {}: {} records, {} failed",
        args.out.display(),
        records.len(),
        failed
    );
    Ok(())
}

fn cmd_corpus_stats(path: &Path) -> Result<(), CliError> {
    let records = load_corpus_at(path)?;
    let stats = corpus_stats(&records);
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    Ok(())
}
