//! `semgraph`: build, query, evaluate and inspect semantic-graph indices.
//!
//! Exit codes: 0 success, 2 input error (bad files, config or arguments),
//! 3 provider or runtime failure.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use semgraph::config::{AppConfig, ProviderKind};
use semgraph::embed::{Gateway, HttpProvider};
use semgraph::eval::{evaluate, read_qrels, read_run, round3, timing_report, Phase, TimingReport};
use semgraph::graph::{load_index, save_index, SemanticGraph};
use semgraph::indexer::build_index;
use semgraph::retrieval::{retrieve, write_run, RankedResult};
use semgraph::synth::{polysemy_corpus, SynthConfig};
use semgraph::text::corpus::{read_corpus, read_queries};
use semgraph::Error;

#[derive(Parser)]
#[command(
    name = "semgraph",
    version,
    about = "LLM-free retrieval over a polysemy-aware semantic graph"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a JSON-lines corpus.
    Index(IndexArgs),
    /// Answer queries against an index.
    Query(QueryArgs),
    /// Score a run file against relevance judgments.
    Eval(EvalArgs),
    /// Print graph statistics for an index.
    Stats(StatsArgs),
    /// Write a synthetic polysemy corpus with queries and judgments.
    Synth(SynthArgs),
    /// Print the effective configuration as flat JSON.
    Config(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Synthetic,
    Http,
}

/// Options shared by every command that embeds text.
#[derive(Args)]
struct EngineArgs {
    /// Flat dotted-key JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `provider.kind`.
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Overrides `provider.seed` (default 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// JSON-lines file of `{query_id, text}` records.
    #[arg(long, required_unless_present = "text", requires = "out")]
    queries: Option<PathBuf>,
    /// Run file to write (TSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// A single inline query; results go to stdout.
    #[arg(long, conflicts_with = "queries")]
    text: Option<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Index the run was produced from; supplies `num_docs`.
    #[arg(long)]
    index: PathBuf,
    /// JSON summaries printed by `index` or `query`; their `ait_s` and
    /// `aqt_s` fields are carried into the metrics.
    #[arg(long)]
    timings: Vec<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
    /// Number of most polysemous tokens to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, queries.jsonl and qrels.tsv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    docs: usize,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

/// An error already classified as bad input.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::ProviderUnavailable(_)
                | Error::DimensionMismatch { .. }
                | Error::Protocol(_)
                | Error::InvalidState(_) => 3,
                _ => 2,
            };
        }
    }
    3
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Config(a) => cmd_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(AppConfig::default()),
    }
}

impl EngineArgs {
    fn resolve(&self) -> Result<AppConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(p) = self.provider {
            cfg.provider.kind = match p {
                ProviderArg::Synthetic => ProviderKind::Synthetic,
                ProviderArg::Http => ProviderKind::Http,
            };
        }
        if let Some(seed) = self.seed {
            cfg.provider.seed = seed;
        }
        cfg.validate()?;
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(InputError("--jobs must be at least 1".into()).into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .context("configuring worker threads")?;
        }
        Ok(cfg)
    }
}

/// Builds the embedding gateway, checking a remote service's health first.
fn gateway(cfg: &AppConfig) -> Result<Gateway> {
    let provider_cfg = cfg.provider.provider_config();
    if let semgraph::embed::ProviderConfig::Http(http) = &provider_cfg {
        let health = HttpProvider::new(http.clone())?.health()?;
        if health.status != "ok" {
            return Err(Error::ProviderUnavailable(format!("service status {:?}", health.status)).into());
        }
        tracing::info!(model = %health.model, dim = health.dim, "embedding service ready");
    }
    Ok(Gateway::from_config(&provider_cfg)?)
}

fn print_json(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let cfg = a.engine.resolve()?;
    let docs = read_corpus(&a.corpus)?;
    let gateway = gateway(&cfg)?;
    let chunking = cfg.chunking_config()?;
    let (graph, report) = build_index(&docs, &gateway, &chunking, &cfg.induction)?;
    save_index(&graph, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    tracing::info!(?report.induction, "induction summary");
    print_json(&json!({
        "docs": report.docs,
        "chunks": report.chunks,
        "tokens": report.tokens,
        "semantic_nodes": report.semantic_nodes,
        "multi_sense_tokens": report.multi_sense_tokens,
        "ait_s": report.ait_s,
    }))
}

fn open_index(path: &Path) -> Result<SemanticGraph> {
    load_index(path).with_context(|| format!("reading index {}", path.display()))
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let cfg = a.engine.resolve()?;
    if a.k == 0 {
        return Err(InputError("--k must be at least 1".into()).into());
    }
    let graph = open_index(&a.index)?;
    let gateway = gateway(&cfg)?;
    let chunking = cfg.chunking_config()?;
    let answer = |text: &str| -> semgraph::Result<(RankedResult, std::time::Duration)> {
        let started = Instant::now();
        let result = retrieve(text, a.k, &graph, &gateway, &chunking, &cfg.query)?;
        Ok((result, started.elapsed()))
    };

    if let Some(text) = &a.text {
        let (result, elapsed) = answer(text)?;
        let mut out = io::stdout().lock();
        write_run(&mut out, "text", &result, &graph)?;
        tracing::info!(seconds = elapsed.as_secs_f64(), "query answered");
        return Ok(());
    }

    let (Some(queries), Some(out_path)) = (&a.queries, &a.out) else {
        return Err(InputError("--queries and --out are required without --text".into()).into());
    };
    let queries = read_queries(queries)?;
    let answered: Vec<(RankedResult, std::time::Duration)> = queries
        .par_iter()
        .map(|q| answer(&q.text))
        .collect::<semgraph::Result<_>>()?;

    let file = fs::File::create(out_path).with_context(|| format!("creating {}", out_path.display()))?;
    let mut out = BufWriter::new(file);
    for (q, (result, _)) in queries.iter().zip(&answered) {
        write_run(&mut out, &q.query_id, result, &graph)?;
    }
    out.flush()?;
    let events: Vec<(Phase, std::time::Duration)> = answered.iter().map(|(_, d)| (Phase::Query, *d)).collect();
    let TimingReport { aqt_s, .. } = timing_report(&events);
    print_json(&json!({ "queries": queries.len(), "aqt_s": aqt_s }))
}

/// Reads `ait_s`/`aqt_s` from summaries printed by other commands.
fn collect_timings(paths: &[PathBuf]) -> Result<TimingReport> {
    let mut report = TimingReport {
        ait_s: None,
        aqt_s: None,
    };
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).with_context(|| format!("{} is not a JSON object", path.display()))?;
        if let Some(x) = value.get("ait_s").and_then(Value::as_f64) {
            report.ait_s = Some(round3(x));
        }
        if let Some(x) = value.get("aqt_s").and_then(Value::as_f64) {
            report.aqt_s = Some(round3(x));
        }
    }
    Ok(report)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let run = read_run(&a.run)?;
    let qrels = read_qrels(&a.qrels)?;
    let graph = open_index(&a.index)?;
    let timing = collect_timings(&a.timings)?;
    let metrics = evaluate(&run, &qrels, timing, graph.docs().len())?;
    print_json(&serde_json::to_value(metrics)?)
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let graph = open_index(&a.index)?;
    let mut polysemous: Vec<(&str, usize)> = graph
        .tokens()
        .iter()
        .filter(|t| t.semantics.len() > 1)
        .map(|t| (t.surface.as_str(), t.semantics.len()))
        .collect();
    polysemous.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    let multi_sense = polysemous.len();
    polysemous.truncate(a.top);
    print_json(&json!({
        "docs": graph.docs().len(),
        "chunks": graph.chunks().len(),
        "tokens": graph.tokens().len(),
        "semantic_nodes": graph.semantics().len(),
        "multi_sense_tokens": multi_sense,
        "dim": graph.dim(),
        "avg_chunk_len": graph.stats().avg_chunk_len(),
        "edges": graph.edges().len(),
        "most_polysemous": polysemous
            .iter()
            .map(|(s, n)| json!({ "surface": s, "nodes": n }))
            .collect::<Vec<_>>(),
    }))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let corpus = polysemy_corpus(&SynthConfig {
        seed: a.seed,
        num_docs: a.docs,
        ..Default::default()
    });
    corpus.write_to(&a.out)?;
    print_json(&json!({
        "docs": corpus.docs.len(),
        "queries": corpus.queries.len(),
        "judgments": corpus.qrels.len(),
        "dir": a.out.display().to_string(),
    }))
}

fn cmd_config(a: ConfigArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &cfg.to_flat_json())?;
    writeln!(out)?;
    Ok(())
}
