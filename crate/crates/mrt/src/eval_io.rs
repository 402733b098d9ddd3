//! Prediction and gold files, scoring and ensembling over them.
//!
//! Both file kinds are JSON lines of `{question_id, answer_type, value}`.
//! A prediction line with a null value (a failed question) counts as
//! missing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mrt_core::eval::{majority_vote, score, CompareOptions};
use mrt_core::{AnswerType, EvalReport, TypedAnswer};
use serde::Serialize;

use crate::error::{Error, Result};

/// One run's answers, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub run_id: String,
    pub priority_rank: u32,
    pub records: Vec<(String, TypedAnswer)>,
}

impl RunFile {
    pub fn map(&self) -> BTreeMap<String, TypedAnswer> {
        self.records.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionLine<'a> {
    pub question_id: &'a str,
    pub answer_type: Option<AnswerType>,
    pub value: Option<&'a mrt_core::AnswerValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'a str>,
}

pub fn prediction_line(question_id: &str, answer: Option<&TypedAnswer>, error: Option<&str>) -> String {
    let line = PredictionLine {
        question_id,
        answer_type: answer.map(|a| a.answer_type),
        value: answer.map(|a| &a.value),
        error: if answer.is_some() { None } else { error },
    };
    serde_json::to_string(&line).expect("predictions serialize")
}

/// Read a predictions or gold file. Lines whose value is null are skipped;
/// a repeated id keeps its last answer.
pub fn read_answers(path: &Path) -> Result<RunFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records: Vec<(String, TypedAnswer)> = Vec::new();
    let bad = |line: usize, message: String| Error::BadRecord { path: path.to_path_buf(), line, message };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        let id = v
            .get("question_id")
            .and_then(|id| id.as_str().map(str::to_string).or_else(|| id.as_i64().map(|n| n.to_string())))
            .ok_or_else(|| bad(i + 1, "missing question_id".into()))?;
        if v.get("value").is_none_or(|x| x.is_null()) {
            continue;
        }
        let answer: TypedAnswer = match serde_json::from_value(v) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("{}:{}: unreadable answer for `{id}`: {e}", path.display(), i + 1);
                continue;
            }
        };
        match records.iter_mut().find(|(k, _)| *k == id) {
            Some(slot) => slot.1 = answer,
            None => records.push((id, answer)),
        }
    }
    let run_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(RunFile { run_id, priority_rank: 1, records })
}

/// Score `predictions` against `gold`; unknown prediction ids are reported
/// with a warning and ignored.
pub fn evaluate(predictions: &RunFile, gold: &RunFile, opts: CompareOptions) -> EvalReport {
    let gold_map = gold.map();
    let types: BTreeMap<String, AnswerType> = gold_map.iter().map(|(k, v)| (k.clone(), v.answer_type)).collect();
    let report = score(&predictions.map(), &gold_map, &types, opts);
    for id in &report.unknown_ids {
        log::warn!("prediction for unknown question id `{id}` ignored");
    }
    report
}

/// Majority vote per question over several runs. Questions appear in order
/// of first appearance across the runs (taken in the order given).
pub fn ensemble(runs: &[RunFile], opts: CompareOptions) -> Vec<(String, TypedAnswer)> {
    let mut order: Vec<&str> = Vec::new();
    let mut votes: BTreeMap<&str, Vec<(TypedAnswer, u32)>> = BTreeMap::new();
    for run in runs {
        for (id, answer) in &run.records {
            let entry = votes.entry(id.as_str()).or_default();
            if entry.is_empty() {
                order.push(id);
            }
            entry.push((answer.clone(), run.priority_rank));
        }
    }
    order
        .into_iter()
        .filter_map(|id| majority_vote(&votes[id], opts).map(|a| (id.to_string(), a)))
        .collect()
}

pub fn render_answers(records: &[(String, TypedAnswer)]) -> String {
    let mut out = String::new();
    for (id, answer) in records {
        out.push_str(&prediction_line(id, Some(answer), None));
        out.push('\n');
    }
    out
}
