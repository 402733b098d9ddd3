//! The question-answering driver.
//!
//! Each question moves through the same seven steps. In sequential mode a
//! worker takes one question through all of them before starting the next;
//! in stage-batched mode every question finishes a step before any question
//! starts the following one. Workers own one harness each and take the
//! questions whose index is congruent to their own number.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use mrt_core::explain::unknown_column_references;
use mrt_core::format::format_answer;
use mrt_core::{AnswerType, RawValue, TableProfile, TypedAnswer};
use serde::Deserialize;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::eval_io::prediction_line;
use crate::explainer::{draft_instructions, refine_instructions, ExplainSettings};
use crate::gateway::Gateway;
use crate::harness::{Harness, ProcessHarness};
use crate::interpreter::{coerce_answer, infer_answer_type, TypeSource};
use crate::profiler::{profile_table, ProfileCache, ProfileSettings, ProfileSource};
use crate::prompts::PromptSet;
use crate::runner::{run_with_retries, RunResult, RunSettings};
use crate::table_io::{load_table, LoadedTable};
use crate::trace::{PipelineTrace, TraceSink, TRACE_FILE};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";

/// One manifest line. `table` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    pub question_id: String,
    pub table: String,
    pub question: String,
    #[serde(default)]
    pub answer_type: Option<AnswerType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: String,
    pub text: String,
    /// As written in the manifest; recorded in the trace.
    pub table: String,
    pub table_path: PathBuf,
    pub answer_type: Option<AnswerType>,
}

impl Question {
    pub fn new(id: &str, text: &str, table_path: &Path, answer_type: Option<AnswerType>) -> Question {
        Question {
            id: id.to_string(),
            text: text.to_string(),
            table: table_path.to_string_lossy().into_owned(),
            table_path: table_path.to_path_buf(),
            answer_type,
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<Question>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line).map_err(|err| Error::BadRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: err.to_string(),
        })?;
        out.push(Question {
            table_path: base.join(&e.table),
            id: e.question_id,
            text: e.question,
            table: e.table,
            answer_type: e.answer_type,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for q in &out {
        if !seen.insert(q.id.as_str()) {
            log::warn!("question id `{}` appears more than once in {}", q.id, path.display());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Profile,
    Explain,
    Refine,
    CodeAndRun,
    AnswerType,
    Coerce,
    Format,
}

impl Step {
    pub const ALL: [Step; 7] =
        [Step::Profile, Step::Explain, Step::Refine, Step::CodeAndRun, Step::AnswerType, Step::Coerce, Step::Format];

    fn key(self) -> &'static str {
        match self {
            Step::Profile => "descriptor",
            Step::Explain => "explainer",
            Step::Refine => "explainer_refine",
            Step::CodeAndRun => "coder_runner",
            Step::AnswerType => "interpreter_type",
            Step::Coerce => "interpreter_coerce",
            Step::Format => "formatter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionResult {
    pub trace: PipelineTrace,
    pub answer: Option<TypedAnswer>,
    /// Set when the question failed because the LLM could not be reached.
    pub gateway_failure: bool,
}

impl QuestionResult {
    pub fn error(&self) -> Option<&str> {
        self.trace.error.as_deref()
    }
}

struct State {
    q: Question,
    trace: PipelineTrace,
    table: Option<Arc<LoadedTable>>,
    profile: Option<TableProfile>,
    draft: Option<String>,
    run: Option<RunResult>,
    interpreted: Option<TypedAnswer>,
    gateway_failure: bool,
    timings: BTreeMap<String, u64>,
}

impl State {
    fn new(q: &Question) -> State {
        State {
            trace: PipelineTrace {
                question_id: q.id.clone(),
                question: q.text.clone(),
                table: q.table.clone(),
                ..PipelineTrace::default()
            },
            q: q.clone(),
            table: None,
            profile: None,
            draft: None,
            run: None,
            interpreted: None,
            gateway_failure: false,
            timings: BTreeMap::new(),
        }
    }

    fn fail(&mut self, e: Error) {
        log::warn!("{}: {e}", self.q.id);
        self.gateway_failure = matches!(e, Error::Gateway(_));
        self.trace.error = Some(e.to_string());
    }
}

pub struct Pipeline {
    config: RunConfig,
    gateway: Gateway,
    prompts: PromptSet,
    cache: ProfileCache,
    harnesses: Vec<Mutex<Box<dyn Harness>>>,
    tables: Mutex<HashMap<PathBuf, Arc<LoadedTable>>>,
}

impl Pipeline {
    /// `make_harness` is called once per worker.
    pub fn new(
        config: RunConfig,
        gateway: Gateway,
        prompts: PromptSet,
        mut make_harness: impl FnMut() -> Box<dyn Harness>,
    ) -> Pipeline {
        let workers = config.workers.max(1);
        let harnesses = (0..workers).map(|_| Mutex::new(make_harness())).collect();
        Pipeline {
            cache: ProfileCache::new(config.cache_dir.clone()),
            config,
            gateway,
            prompts,
            harnesses,
            tables: Mutex::new(HashMap::new()),
        }
    }

    /// Gateway, prompts and process harnesses as configured.
    pub fn from_config(config: RunConfig) -> Result<Pipeline> {
        let gateway = Gateway::new(config.gateway.clone())?;
        let prompts = match &config.prompts_dir {
            Some(dir) => PromptSet::with_overrides(dir)?,
            None => PromptSet::builtin(),
        };
        let settings = config.harness.settings();
        Ok(Pipeline::new(config, gateway, prompts, || Box::new(ProcessHarness::new(settings.clone()))))
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn cache(&self) -> &ProfileCache {
        &self.cache
    }

    /// Answer every question; results come back in input order.
    pub fn run(&self, questions: &[Question]) -> Vec<QuestionResult> {
        let states: Vec<Mutex<State>> = questions.iter().map(|q| Mutex::new(State::new(q))).collect();
        let workers = self.harnesses.len().min(questions.len()).max(1);
        let for_worker = |w: usize| (0..states.len()).filter(move |i| i % workers == w);
        match self.config.mode {
            Mode::Sequential => std::thread::scope(|s| {
                for w in 0..workers {
                    let states = &states;
                    s.spawn(move || {
                        for i in for_worker(w) {
                            let mut st = states[i].lock().unwrap();
                            for step in Step::ALL {
                                self.step(step, &mut st, w);
                            }
                        }
                    });
                }
            }),
            Mode::StageBatched => {
                for step in Step::ALL {
                    std::thread::scope(|s| {
                        for w in 0..workers {
                            let states = &states;
                            s.spawn(move || {
                                for i in for_worker(w) {
                                    self.step(step, &mut states[i].lock().unwrap(), w);
                                }
                            });
                        }
                    });
                }
            }
        }
        states.into_iter().map(|m| self.finish(m.into_inner().unwrap())).collect()
    }

    fn step(&self, step: Step, st: &mut State, worker: usize) {
        if st.trace.error.is_some() {
            return;
        }
        let started = Instant::now();
        let result = match step {
            Step::Profile => self.do_profile(st),
            Step::Explain => self.do_explain(st),
            Step::Refine => self.do_refine(st),
            Step::CodeAndRun => self.do_code_and_run(st, worker),
            Step::AnswerType => self.do_answer_type(st),
            Step::Coerce => self.do_coerce(st),
            Step::Format => {
                self.do_format(st);
                Ok(())
            }
        };
        st.timings.insert(step.key().to_string(), started.elapsed().as_millis() as u64);
        if let Err(e) = result {
            st.fail(e);
        }
    }

    /// Each table is read once per pipeline; failed loads are retried.
    fn table(&self, path: &Path) -> Result<Arc<LoadedTable>> {
        let mut tables = self.tables.lock().unwrap();
        if let Some(t) = tables.get(path) {
            return Ok(t.clone());
        }
        let t = Arc::new(load_table(path)?);
        tables.insert(path.to_path_buf(), t.clone());
        Ok(t)
    }

    /// Profile one table through the shared cache.
    pub fn profile(&self, path: &Path) -> Result<(Arc<LoadedTable>, TableProfile, ProfileSource)> {
        let table = self.table(path)?;
        let t = &self.config.thresholds;
        let settings = ProfileSettings {
            max_rows: t.max_rows,
            max_cell_chars: t.max_cell_chars,
            stats: self.config.stats_options(),
        };
        let (profile, source) = profile_table(&table, &self.cache, &self.gateway, &self.prompts, &settings)?;
        Ok((table, profile, source))
    }

    fn do_profile(&self, st: &mut State) -> Result<()> {
        let (table, profile, _) = self.profile(&st.q.table_path)?;
        st.trace.table_fingerprint = Some(table.fingerprint.clone());
        st.trace.flags.fallback_description = profile.fallback_descriptions;
        st.table = Some(table);
        st.profile = Some(profile);
        Ok(())
    }

    fn explain_settings(&self) -> ExplainSettings {
        ExplainSettings {
            unique_listing_threshold: self.config.thresholds.unique_listing_threshold,
            max_steps: self.config.thresholds.max_steps,
        }
    }

    fn do_explain(&self, st: &mut State) -> Result<()> {
        let profile = st.profile.as_ref().expect("profiled");
        let draft =
            draft_instructions(&st.q.id, &st.q.text, profile, &self.gateway, &self.prompts, &self.explain_settings())?;
        st.trace.draft = Some(draft.clone());
        st.draft = Some(draft);
        Ok(())
    }

    fn do_refine(&self, st: &mut State) -> Result<()> {
        let profile = st.profile.as_ref().expect("profiled");
        let draft = st.draft.as_deref().unwrap_or_default();
        let plan = refine_instructions(
            &st.q.id,
            &st.q.text,
            profile,
            draft,
            &self.gateway,
            &self.prompts,
            &self.explain_settings(),
        )?;
        st.trace.unknown_columns = unknown_column_references(&plan.steps, profile);
        if !st.trace.unknown_columns.is_empty() {
            log::warn!("{}: plan mentions unknown columns {:?}", st.q.id, st.trace.unknown_columns);
        }
        st.trace.flags.plan_unrefined = !plan.refined;
        st.trace.flags.plan_truncated = plan.truncated;
        st.trace.plan = Some(plan);
        Ok(())
    }

    fn do_code_and_run(&self, st: &mut State, worker: usize) -> Result<()> {
        let t = &self.config.thresholds;
        let settings = RunSettings {
            max_runtime_retries: t.max_runtime_retries,
            max_repair_attempts: t.max_repair_attempts,
            timeout_s: t.timeout_s,
            unique_listing_threshold: t.unique_listing_threshold,
        };
        let table = st.table.as_ref().expect("profiled");
        let mut harness = self.harnesses[worker].lock().unwrap();
        let result = run_with_retries(
            &st.q.id,
            st.trace.plan.as_ref().expect("planned"),
            st.profile.as_ref().expect("profiled"),
            table.harness_path(),
            &self.gateway,
            &self.prompts,
            harness.as_mut(),
            &settings,
        )?;
        st.trace.attempts = result.attempts.clone();
        st.trace.runtime_retries = Some(result.runtime_retries);
        if result.outcome.ok {
            st.trace.raw_value = Some(result.outcome.value.clone().unwrap_or(RawValue::Null));
        } else {
            st.trace.error = Some(result.outcome.error_text());
        }
        st.run = Some(result);
        Ok(())
    }

    fn do_answer_type(&self, st: &mut State) -> Result<()> {
        let (t, source) = match st.q.answer_type {
            Some(t) => (t, TypeSource::Manifest),
            None => infer_answer_type(&st.q.id, &st.q.text, &self.gateway, &self.prompts)?,
        };
        st.trace.flags.type_default = source == TypeSource::Default;
        st.trace.answer_type = Some(t);
        st.trace.answer_type_source = Some(source);
        Ok(())
    }

    fn do_coerce(&self, st: &mut State) -> Result<()> {
        let raw = st.trace.raw_value.clone().unwrap_or(RawValue::Null);
        let target = st.trace.answer_type.expect("typed");
        let c = coerce_answer(&st.q.id, &st.q.text, &raw, target, &self.gateway, &self.prompts)?;
        st.trace.flags.coercion_failed = c.failed;
        st.trace.interpreted = Some(c.answer.clone());
        st.interpreted = Some(c.answer);
        Ok(())
    }

    fn do_format(&self, st: &mut State) {
        let interpreted = st.interpreted.clone().expect("interpreted");
        if self.config.formatter.enabled {
            let formatted = format_answer(&interpreted, self.config.formatter.decimals);
            st.trace.formatted = Some(formatted.clone());
            st.trace.answer = Some(formatted);
        } else {
            st.trace.flags.formatter_disabled = true;
            st.trace.answer = Some(interpreted);
        }
    }

    fn finish(&self, mut st: State) -> QuestionResult {
        st.trace.llm_calls = self.gateway.call_ids(&st.q.id);
        if self.config.trace.record_timings {
            st.trace.timings_ms = Some(st.timings);
        } else {
            for a in &mut st.trace.attempts {
                a.outcome.wall_ms = None;
            }
        }
        let answer = if st.trace.error.is_none() { st.trace.answer.clone() } else { None };
        QuestionResult { trace: st.trace, answer, gateway_failure: st.gateway_failure }
    }

    /// Write predictions (replacing the file), traces (appended) and the
    /// gateway interaction log (replacing the file) under `dir`.
    pub fn write_outputs(&self, dir: &Path, results: &[QuestionResult]) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut predictions = String::new();
        for r in results {
            predictions.push_str(&prediction_line(&r.trace.question_id, r.answer.as_ref(), r.error()));
            predictions.push('\n');
        }
        let p = dir.join(PREDICTIONS_FILE);
        fs::write(&p, predictions).map_err(|e| Error::io(&p, e))?;

        let sink = TraceSink::open(&dir.join(TRACE_FILE))?;
        for r in results {
            sink.write(&r.trace)?;
        }

        let mut log = String::new();
        for mut i in self.gateway.interactions() {
            if !self.config.trace.record_timings {
                i.latency_ms = 0;
            }
            log.push_str(&serde_json::to_string(&i).expect("json"));
            log.push('\n');
        }
        let p = dir.join(INTERACTIONS_FILE);
        fs::write(&p, log).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}
