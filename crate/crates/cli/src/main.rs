//! `truemem` command line: ingest JSONL streams, run queries, run batch
//! stages, inspect stats, and drive the bench harness.
//!
//! Machine-readable JSON goes to stdout; diagnostics go to stderr. Exit
//! code 0 means no fatal error; per-line ingest problems are reported and
//! skipped without aborting the run.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use truemem_core::bench::{
    default_gate_grid, eval_retrieval, generate_corpus, grid_to_csv, ingest_corpus, run_grid,
    sweep_gate, LabeledEvent, SyntheticCorpus,
};
use truemem_core::config::{apply_config_text, apply_env};
use truemem_core::consolidate::Window;
use truemem_core::embed::builtin_embedder;
use truemem_core::engine::{Engine, EngineConfig, IngestOutcome};
use truemem_core::error::Error;
use truemem_core::event::EventInput;
use truemem_core::fusion::RerankerChoice;

#[derive(Parser)]
#[command(name = "truemem", version, about = "Embedded agent-memory engine")]
struct Cli {
    /// Store file path.
    #[arg(long, global = true, default_value = "memory.tm")]
    store: PathBuf,

    /// Optional config file (sectioned key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output format for query and stats results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum GateFlag {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON Lines file, one event object per line.
    Ingest(IngestArgs),
    /// Query the store and print ranked results.
    Query(QueryArgs),
    /// Run all batch stages: consolidate, surprise index, engrams.
    Batch,
    /// Run consolidation alone.
    Consolidate {
        /// Window as a count of recent events; defaults to the engine's
        /// sliding window.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Rebuild the surprise index.
    BuildSurprise,
    /// Refresh per-speaker profiles and style vectors.
    UpdateEngrams,
    /// Print store statistics.
    Stats,
    /// Evaluation harness.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct IngestArgs {
    /// Input JSONL file.
    #[arg(long)]
    input: PathBuf,
    /// Enable or disable the encoding gate for this run, overriding the
    /// config file. Unset: the config file (or the default-on gate) wins.
    #[arg(long, value_enum)]
    gate: Option<GateFlag>,
    /// Append rejected events as JSONL to this file.
    #[arg(long)]
    reject_log: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Query text.
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Print per-stage candidate counts to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Generate a synthetic corpus file.
    Generate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        events: usize,
        #[arg(long, default_value_t = 20)]
        queries: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a corpus into a fresh store and report recall@k and MRR.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Directory for the throwaway store file.
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
    /// Sweep gate configs over a labeled JSONL stream and report AUC.
    Sweep {
        /// JSONL of event objects with an extra boolean `keep` field.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
    /// Run the embedder x reranker grid and emit CSV.
    Grid {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated embedder names.
        #[arg(long, default_value = "default-hash-256,token-hash-256")]
        embedders: String,
        /// Comma-separated reranker names (default, identity, none).
        #[arg(long, default_value = "default,identity,none")]
        rerankers: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        work_dir: Option<PathBuf>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct IngestSummary {
    admitted: usize,
    rejected: usize,
    errors: usize,
}

fn load_config(cli: &Cli) -> Result<EngineConfig, Error> {
    let mut config = EngineConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        apply_config_text(&mut config, &text)?;
    } else {
        apply_env(&mut config)?;
    }
    Ok(config)
}

fn work_dir_or_temp(dir: &Option<PathBuf>) -> std::io::Result<PathBuf> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            Ok(d.clone())
        }
        None => {
            let d = std::env::temp_dir().join(format!("truemem-bench-{}", std::process::id()));
            std::fs::create_dir_all(&d)?;
            Ok(d)
        }
    }
}

fn cmd_ingest(engine: &mut Engine, args: &IngestArgs) -> Result<IngestSummary, Error> {
    let file = std::fs::File::open(&args.input)?;
    let reader = BufReader::new(file);
    let mut summary = IngestSummary {
        admitted: 0,
        rejected: 0,
        errors: 0,
    };
    let mut reject_log = match &args.reject_log {
        Some(path) => Some(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?,
        ),
        None => None,
    };
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let input: EventInput = match serde_json::from_str(&line) {
            Ok(input) => input,
            Err(e) => {
                eprintln!("line {line_no}: malformed event: {e}");
                summary.errors += 1;
                continue;
            }
        };
        match engine.ingest(input.clone()) {
            Ok(IngestOutcome::Admitted(_)) => summary.admitted += 1,
            Ok(IngestOutcome::Rejected(signals)) => {
                summary.rejected += 1;
                if let Some(log) = reject_log.as_mut() {
                    let entry = serde_json::json!({
                        "line": line_no,
                        "text": input.text,
                        "sender": input.sender,
                        "signals": signals,
                    });
                    writeln!(log, "{entry}")?;
                }
            }
            Err(Error::EmptyText) | Err(Error::NegativeTimestamp(_)) => {
                eprintln!("line {line_no}: invalid event, skipped");
                summary.errors += 1;
            }
            Err(e) => return Err(e),
        }
    }
    engine.sync()?;
    Ok(summary)
}

fn read_corpus(path: &Path) -> Result<SyntheticCorpus, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Ingest(args) => {
            let mut config = load_config(cli)?;
            match args.gate {
                Some(GateFlag::Off) => config.gate.tau = None,
                Some(GateFlag::On) if config.gate.tau.is_none() => {
                    config.gate.tau = Some(0.30);
                }
                _ => {}
            }
            let mut engine = Engine::open(&cli.store, config)?;
            let summary = cmd_ingest(&mut engine, args)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Query(args) => {
            let engine = Engine::open(&cli.store, load_config(cli)?)?;
            let (results, trace) = engine.query_traced(&args.query, args.k)?;
            if args.trace {
                for stage in &trace {
                    eprintln!(
                        "stage {:<10} in {:>4} out {:>4}",
                        stage.stage, stage.candidates_in, stage.candidates_out
                    );
                }
            }
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string(&results)?),
                Format::Table => {
                    for r in &results {
                        println!(
                            "{:>6}  {:>8.5}  {:<8}  {:>12}  {}",
                            r.event_id,
                            r.score,
                            r.modality.as_str(),
                            r.timestamp,
                            r.text
                        );
                    }
                }
            }
        }
        Command::Batch => {
            let mut engine = Engine::open(&cli.store, load_config(cli)?)?;
            let report = engine.run_batch()?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Consolidate { window } => {
            let mut engine = Engine::open(&cli.store, load_config(cli)?)?;
            let window = window.map_or(Window::Default, Window::Events);
            let report = engine.consolidate_window(window)?;
            let counts = serde_json::json!({
                "summaries": report.summaries.len(),
                "contradictions": report.contradictions.len(),
                "timeline_assertions": report.timeline_deltas.len(),
            });
            println!("{counts}");
        }
        Command::BuildSurprise => {
            let mut engine = Engine::open(&cli.store, load_config(cli)?)?;
            let scored = engine.build_surprise()?;
            println!("{}", serde_json::json!({ "surprise_scored": scored }));
        }
        Command::UpdateEngrams => {
            let mut engine = Engine::open(&cli.store, load_config(cli)?)?;
            let entities = engine.update_engrams()?;
            println!("{}", serde_json::json!({ "entities_refreshed": entities }));
        }
        Command::Stats => {
            let engine = Engine::open(&cli.store, load_config(cli)?)?;
            let stats = engine.stats();
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string(&stats)?),
                Format::Table => {
                    println!("events               {}", stats.events);
                    println!("messages             {}", stats.messages);
                    println!("summaries            {}", stats.summaries);
                    println!("episodes             {}", stats.episodes);
                    println!("entities             {}", stats.entities);
                    println!("surprise scored      {}", stats.surprise_scored);
                    println!("contradictions       {}", stats.contradictions);
                    println!("timeline assertions  {}", stats.timeline_assertions);
                    println!("distinct senders     {}", stats.distinct_senders);
                    println!("schema version       {}", stats.schema_version);
                    println!("embedder             {}", stats.embedder);
                }
            }
        }
        Command::Bench(bench_cmd) => run_bench(cli, bench_cmd)?,
    }
    Ok(())
}

fn run_bench(cli: &Cli, command: &BenchCommand) -> Result<(), Error> {
    match command {
        BenchCommand::Generate {
            seed,
            events,
            queries,
            out,
        } => {
            let corpus = generate_corpus(*seed, *events, *queries);
            std::fs::write(out, serde_json::to_string_pretty(&corpus)?)?;
            println!(
                "{}",
                serde_json::json!({
                    "seed": seed,
                    "events": corpus.events.len(),
                    "queries": corpus.queries.len(),
                    "planted_sessions": corpus.planted_sessions,
                    "out": out,
                })
            );
        }
        BenchCommand::Eval {
            corpus,
            k,
            work_dir,
        } => {
            let corpus = read_corpus(corpus)?;
            let dir = work_dir_or_temp(work_dir)?;
            let config = load_config(cli)?;
            let engine = ingest_corpus(
                &dir.join("eval.tm"),
                &corpus,
                config.embedder.clone(),
                config.reranker.clone(),
            )?;
            let metrics = eval_retrieval(&engine, &corpus, *k)?;
            println!("{}", serde_json::to_string(&metrics)?);
        }
        BenchCommand::Sweep { input, work_dir } => {
            let text = std::fs::read_to_string(input)?;
            let mut labeled = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let item: LabeledEvent =
                    serde_json::from_str(line).map_err(|e| Error::ConfigParse {
                        line: idx + 1,
                        detail: format!("labeled event: {e}"),
                    })?;
                labeled.push(item);
            }
            let dir = work_dir_or_temp(work_dir)?;
            let config = load_config(cli)?;
            let results = sweep_gate(
                &dir,
                &labeled,
                &default_gate_grid(),
                config.embedder.clone(),
            )?;
            println!("{}", serde_json::to_string(&results)?);
        }
        BenchCommand::Grid {
            corpus,
            embedders,
            rerankers,
            k,
            work_dir,
            out,
        } => {
            let corpus = read_corpus(corpus)?;
            let dir = work_dir_or_temp(work_dir)?;
            let mut embedder_objs = Vec::new();
            for name in embedders
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
            {
                let embedder = builtin_embedder(name).ok_or_else(|| Error::ConfigParse {
                    line: 0,
                    detail: format!("unknown embedder {name:?}"),
                })?;
                embedder_objs.push(embedder);
            }
            let mut reranker_objs: Vec<RerankerChoice> = Vec::new();
            for name in rerankers
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
            {
                let choice = RerankerChoice::from_name(name).ok_or_else(|| Error::ConfigParse {
                    line: 0,
                    detail: format!("unknown reranker {name:?}"),
                })?;
                reranker_objs.push(choice);
            }
            let cells = run_grid(&dir, &corpus, &embedder_objs, &reranker_objs, *k)?;
            let csv = grid_to_csv(&cells);
            match out {
                Some(path) => {
                    std::fs::write(path, &csv)?;
                    println!(
                        "{}",
                        serde_json::json!({ "cells": cells.len(), "out": path })
                    );
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
