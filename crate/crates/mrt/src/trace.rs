//! Per-question provenance records, written as JSON lines.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use mrt_core::{AnswerType, ErrorCategory, InstructionPlan, RawValue, TypedAnswer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpreter::TypeSource;
use crate::runner::Attempt;

pub const TRACE_FILE: &str = "traces.jsonl";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFlags {
    pub fallback_description: bool,
    pub plan_unrefined: bool,
    pub plan_truncated: bool,
    pub type_default: bool,
    pub coercion_failed: bool,
    pub formatter_disabled: bool,
}

/// Everything that happened to one question. Field order is the pipeline
/// order and is the serialization order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub question_id: String,
    pub question: String,
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_fingerprint: Option<String>,
    /// Milliseconds per stage; omitted when timings are not recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<InstructionPlan>,
    /// Quoted identifiers in the plan that are not columns of the table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attempts: Vec<Attempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_type: Option<AnswerType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_type_source: Option<TypeSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_value: Option<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpreted: Option<TypedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formatted: Option<TypedAnswer>,
    /// The answer reported for the question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<TypedAnswer>,
    pub flags: TraceFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Gateway call ids made for this question, in order.
    #[serde(default)]
    pub llm_calls: Vec<String>,
    #[serde(default)]
    pub error_category: Option<ErrorCategory>,
}

impl PipelineTrace {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("traces serialize")
    }
}

/// Appends whole lines to a trace file; safe to share between threads.
pub struct TraceSink {
    path: PathBuf,
    file: Mutex<File>,
}

impl TraceSink {
    pub fn open(path: &Path) -> Result<TraceSink> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(TraceSink { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one trace as a single line.
    pub fn write(&self, trace: &PipelineTrace) -> Result<()> {
        let mut line = trace.to_line();
        line.push('\n');
        let mut f = self.file.lock().unwrap();
        f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Raw trace lines as JSON objects, keeping unknown fields and key order.
pub fn read_trace_values(path: &Path) -> Result<Vec<serde_json::Map<String, serde_json::Value>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line)
            .map_err(|e| Error::BadRecord { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

/// Set `error_category` on every line for `question_id`. The file is
/// rewritten atomically and left untouched when the id is unknown.
pub fn annotate_error(path: &Path, question_id: &str, category: ErrorCategory) -> Result<usize> {
    let mut traces = read_trace_values(path)?;
    let mut hits = 0;
    for t in &mut traces {
        if t.get("question_id").and_then(|v| v.as_str()) == Some(question_id) {
            t.insert("error_category".into(), serde_json::Value::String(category.as_str().into()));
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::UnknownQuestionId(question_id.to_string()));
    }
    let mut text = String::new();
    for t in &traces {
        text.push_str(&serde_json::to_string(t).expect("json"));
        text.push('\n');
    }
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    fs::write(tmp.path(), text).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(hits)
}

/// Error category of each question, the last line for a question winning.
pub fn error_categories(path: &Path) -> Result<Vec<Option<ErrorCategory>>> {
    let mut by_id: BTreeMap<String, (usize, Option<ErrorCategory>)> = BTreeMap::new();
    for (i, t) in read_trace_values(path)?.into_iter().enumerate() {
        let id = t.get("question_id").and_then(|v| v.as_str()).unwrap_or_default().to_string();
        let cat = t.get("error_category").and_then(|v| v.as_str()).and_then(|s| s.parse().ok());
        let first = by_id.get(&id).map_or(i, |(f, _)| *f);
        by_id.insert(id, (first, cat));
    }
    let mut ordered: Vec<(usize, Option<ErrorCategory>)> = by_id.into_values().collect();
    ordered.sort_by_key(|(i, _)| *i);
    Ok(ordered.into_iter().map(|(_, c)| c).collect())
}
