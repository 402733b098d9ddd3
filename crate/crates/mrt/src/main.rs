use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use mrt::config::{Mode, RunConfig};
use mrt::error::{Error, Result};
use mrt::eval_io::{ensemble, evaluate, read_answers, render_answers};
use mrt::harness::{Harness, ProcessHarness};
use mrt::pipeline::{read_manifest, Pipeline, Question};
use mrt::profiler::{profile_view, ProfileSource};
use mrt::trace::{annotate_error, error_categories, TraceSink, TRACE_FILE};
use mrt_core::eval::render_error_tally;
use mrt_core::{AnswerType, AnswerValue, ErrorCategory};

#[derive(Parser)]
#[command(name = "mrt", version, about = "Answer questions over CSV tables with an LLM-driven pipeline")]
struct Cli {
    /// TOML configuration file; MRT_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// sequential or stage-batched.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Report the interpreter's answer without formatting it.
    #[arg(long, global = true)]
    no_formatter: bool,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile a table and print its column statistics and descriptions.
    Profile {
        #[arg(long)]
        table: PathBuf,
    },
    /// Answer one question about one table.
    Ask {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        question: String,
        /// Skip type inference: boolean, number, category, list[number] or list[category].
        #[arg(long)]
        answer_type: Option<AnswerType>,
        #[arg(long, default_value = "ask")]
        question_id: String,
    },
    /// Answer every question of a JSON-lines manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the configured one.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold answers.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Print the scores as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Fuse several prediction files by majority vote.
    Ensemble {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Comma-separated priority ranks, one per run (1 is highest).
        #[arg(long, value_delimiter = ',')]
        priority: Vec<u32>,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the error-category breakdown of annotated traces.
    ReportErrors {
        #[arg(long)]
        traces: PathBuf,
    },
    /// Record the error category of a question in a trace file.
    Annotate {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        question_id: String,
        #[arg(long)]
        category: ErrorCategory,
    },
    /// Convert a Parquet (or CSV) file to CSV through the harness.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(mode) = cli.mode {
        config.mode = mode;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if cli.no_formatter {
        config.formatter.enabled = false;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Profile { table } => {
            let pipeline = Pipeline::from_config(load_config(&cli)?)?;
            let (_, profile, source) = pipeline.profile(table)?;
            if source == ProfileSource::Cached {
                eprintln!("(cached)");
            }
            emit(&format!("{}\n", serde_json::to_string_pretty(&profile_view(&profile)).expect("json")));
            Ok(0)
        }
        Command::Ask { table, question, answer_type, question_id } => {
            let config = load_config(&cli)?;
            let out_dir = config.output_dir.clone();
            let pipeline = Pipeline::from_config(config)?;
            let q = Question::new(question_id, question, table, *answer_type);
            let result = pipeline.run(std::slice::from_ref(&q)).remove(0);
            TraceSink::open(&out_dir.join(TRACE_FILE))?.write(&result.trace)?;
            match &result.answer {
                Some(answer) => {
                    if result.trace.flags.coercion_failed {
                        eprintln!("warning: the answer could not be coerced to the expected type");
                    }
                    match &answer.value {
                        AnswerValue::Text(s) => emit(&format!("{s}\n")),
                        v => emit(&format!("{}\n", serde_json::to_string(v).expect("json"))),
                    }
                }
                None => emit(&format!("ERROR: {}\n", result.error().unwrap_or("no answer"))),
            }
            Ok(if result.gateway_failure { 3 } else { 0 })
        }
        Command::Run { manifest, output } => {
            let config = load_config(&cli)?;
            let out_dir = output.clone().unwrap_or_else(|| config.output_dir.clone());
            let questions = read_manifest(manifest)?;
            let pipeline = Pipeline::from_config(config)?;
            let results = pipeline.run(&questions);
            pipeline.write_outputs(&out_dir, &results)?;
            let answered = results.iter().filter(|r| r.answer.is_some()).count();
            eprintln!("{answered}/{} questions answered; outputs in {}", results.len(), out_dir.display());
            Ok(if results.iter().any(|r| r.gateway_failure) { 3 } else { 0 })
        }
        Command::Eval { predictions, gold, json } => {
            let config = load_config(&cli)?;
            let report = evaluate(&read_answers(predictions)?, &read_answers(gold)?, config.eval.compare_options());
            if *json {
                let per_type: serde_json::Map<String, serde_json::Value> = report
                    .per_type
                    .iter()
                    .map(|(t, tally)| {
                        let v = serde_json::json!({
                            "correct": tally.correct,
                            "total": tally.total,
                            "accuracy": tally.accuracy(),
                        });
                        (t.wire_name().to_string(), v)
                    })
                    .collect();
                let doc = serde_json::json!({
                    "overall": {
                        "correct": report.overall.correct,
                        "total": report.overall.total,
                        "accuracy": report.accuracy(),
                    },
                    "per_type": per_type,
                    "unknown_ids": report.unknown_ids,
                });
                emit(&format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")));
            } else {
                emit(&report.render_table());
            }
            Ok(0)
        }
        Command::Ensemble { runs, priority, output } => {
            let config = load_config(&cli)?;
            if !priority.is_empty() && priority.len() != runs.len() {
                return Err(Error::Usage(format!(
                    "--priority has {} ranks for {} runs",
                    priority.len(),
                    runs.len()
                )));
            }
            let mut files = Vec::new();
            for (i, path) in runs.iter().enumerate() {
                let mut f = read_answers(path)?;
                f.priority_rank = priority.get(i).copied().unwrap_or(i as u32 + 1);
                files.push(f);
            }
            let text = render_answers(&ensemble(&files, config.eval.compare_options()));
            match output {
                Some(p) => write_file(p, &text)?,
                None => emit(&text),
            }
            Ok(0)
        }
        Command::ReportErrors { traces } => {
            let cats = error_categories(traces)?;
            emit(&render_error_tally(cats.iter().map(|c| c.as_ref())));
            Ok(0)
        }
        Command::Annotate { traces, question_id, category } => {
            let n = annotate_error(traces, question_id, *category)?;
            eprintln!("{question_id}: {} ({n} line(s))", category.label());
            Ok(0)
        }
        Command::Convert { input, output } => {
            let config = load_config(&cli)?;
            if !input.exists() {
                return Err(Error::FileNotFound(input.clone()));
            }
            let mut harness = ProcessHarness::new(config.harness.settings());
            let outcome = harness.convert(input, output)?;
            if !outcome.ok {
                return Err(Error::Io { path: input.clone(), source: std::io::Error::other(outcome.error_text()) });
            }
            Ok(0)
        }
    }
}

/// Write to standard output; a closed pipe (`mrt ... | head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: cannot write to standard output: {e}");
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
