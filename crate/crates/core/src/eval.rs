//! Answer comparison, majority voting and per-type accuracy.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::answer::{AnswerType, AnswerValue, Number, TypedAnswer};
use crate::interpret::coerce_by_rules;
use crate::num::round_to;

/// Relative tolerance used as a backstop after two-decimal rounding.
pub const NUMBER_REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompareOptions {
    pub decimals: u32,
    /// Compare lists element by element in order instead of as multisets.
    pub ordered_lists: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { decimals: 2, ordered_lists: false }
    }
}

fn numbers_equal(a: Number, b: Number, decimals: u32) -> bool {
    let (x, y) = (a.as_f64(), b.as_f64());
    if round_to(x, decimals) == round_to(y, decimals) {
        return true;
    }
    let scale = libm::fmax(libm::fabs(x), libm::fabs(y));
    libm::fabs(x - y) <= NUMBER_REL_TOLERANCE * scale
}

fn texts_equal(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

fn lists_equal<T>(a: &[T], b: &[T], ordered: bool, eq: impl Fn(&T, &T) -> bool) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if ordered {
        return a.iter().zip(b).all(|(x, y)| eq(x, y));
    }
    let mut used = alloc::vec![false; b.len()];
    'outer: for x in a {
        for (j, y) in b.iter().enumerate() {
            if !used[j] && eq(x, y) {
                used[j] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Whether `predicted` matches `gold`. A prediction of another type (or an
/// ill-shaped one) is first coerced toward the gold type with the
/// interpreter's rules; if that fails the answers differ.
pub fn compare_answers(predicted: &TypedAnswer, gold: &TypedAnswer, opts: CompareOptions) -> bool {
    let converted;
    let pred = if predicted.answer_type != gold.answer_type || !predicted.is_well_shaped() {
        match coerce_by_rules(&predicted.value.to_raw(), gold.answer_type) {
            Some(a) => {
                converted = a;
                &converted
            }
            None => return false,
        }
    } else {
        predicted
    };
    let d = opts.decimals;
    match (&pred.value, &gold.value) {
        (AnswerValue::Bool(a), AnswerValue::Bool(b)) => a == b,
        (AnswerValue::Number(a), AnswerValue::Number(b)) => numbers_equal(*a, *b, d),
        (AnswerValue::Text(a), AnswerValue::Text(b)) => texts_equal(a, b),
        (AnswerValue::NumberList(a), AnswerValue::NumberList(b)) => {
            lists_equal(a, b, opts.ordered_lists, |x, y| numbers_equal(*x, *y, d))
        }
        (AnswerValue::TextList(a), AnswerValue::TextList(b)) => {
            lists_equal(a, b, opts.ordered_lists, |x, y| texts_equal(x, y))
        }
        _ => false,
    }
}

/// Fuse answers from several runs. Answers are grouped by [`compare_answers`];
/// the largest group wins, ties go to the group holding the best (lowest)
/// priority rank, and the winner's best-ranked member is returned.
/// `None` for an empty input.
pub fn majority_vote(answers: &[(TypedAnswer, u32)], opts: CompareOptions) -> Option<TypedAnswer> {
    let mut order: Vec<usize> = (0..answers.len()).collect();
    order.sort_by_key(|&i| answers[i].1);
    // Each group lists member indices in rank order; groups are created in
    // order of their best rank.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let candidate = &answers[i].0;
        let home = groups.iter_mut().find(|g| {
            let rep = &answers[g[0]].0;
            compare_answers(candidate, rep, opts) || compare_answers(rep, candidate, opts)
        });
        match home {
            Some(g) => g.push(i),
            None => groups.push(alloc::vec![i]),
        }
    }
    let mut best: Option<&Vec<usize>> = None;
    for g in &groups {
        if best.is_none_or(|b| g.len() > b.len()) {
            best = Some(g);
        }
    }
    best.map(|g| answers[g[0]].0.clone())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub per_type: BTreeMap<AnswerType, Tally>,
    pub overall: Tally,
    /// Prediction ids with no gold entry; ignored in the scores.
    pub unknown_ids: Vec<String>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy().unwrap_or(0.0)
    }

    pub fn type_accuracy(&self, t: AnswerType) -> Option<f64> {
        self.per_type.get(&t).and_then(Tally::accuracy)
    }

    /// Plain-text table: one row per answer type, then the overall row.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<14}{:>9}{:>8}{:>10}\n", "Answer type", "Correct", "Total", "Accuracy");
        let row = |label: &str, t: &Tally| -> String {
            let acc = t.accuracy().map_or("-".to_string(), |a| format!("{:.4}", a));
            format!("{:<14}{:>9}{:>8}{:>10}\n", label, t.correct, t.total, acc)
        };
        for ty in AnswerType::ALL {
            let t = self.per_type.get(&ty).copied().unwrap_or_default();
            out.push_str(&row(ty.display_name(), &t));
        }
        out.push_str(&row("Overall", &self.overall));
        out
    }
}

#[derive(Serialize)]
struct TallyJson {
    correct: usize,
    total: usize,
    accuracy: Option<f64>,
}

impl Serialize for EvalReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let per_type: BTreeMap<&str, TallyJson> = AnswerType::ALL
            .iter()
            .map(|ty| {
                let t = self.per_type.get(ty).copied().unwrap_or_default();
                (ty.display_name(), TallyJson { correct: t.correct, total: t.total, accuracy: t.accuracy() })
            })
            .collect();
        let mut s = serializer.serialize_struct("EvalReport", 3)?;
        s.serialize_field(
            "overall",
            &TallyJson {
                correct: self.overall.correct,
                total: self.overall.total,
                accuracy: self.overall.accuracy(),
            },
        )?;
        s.serialize_field("per_type", &per_type)?;
        s.serialize_field("unknown_ids", &self.unknown_ids)?;
        s.end()
    }
}

/// Score predictions against gold. Every gold id counts; a missing prediction
/// is incorrect. `types` decides the per-type bucket of each question and
/// falls back to the gold answer's type.
pub fn score(
    predictions: &BTreeMap<String, TypedAnswer>,
    gold: &BTreeMap<String, TypedAnswer>,
    types: &BTreeMap<String, AnswerType>,
    opts: CompareOptions,
) -> EvalReport {
    let mut report = EvalReport::default();
    for (id, gold_answer) in gold {
        let ty = types.get(id).copied().unwrap_or(gold_answer.answer_type);
        let correct = predictions
            .get(id)
            .is_some_and(|p| compare_answers(p, gold_answer, opts));
        let bucket = report.per_type.entry(ty).or_default();
        bucket.total += 1;
        report.overall.total += 1;
        if correct {
            bucket.correct += 1;
            report.overall.correct += 1;
        }
    }
    report.unknown_ids = predictions.keys().filter(|k| !gold.contains_key(*k)).cloned().collect();
    report
}

/// Manual error categories for failed questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    WrongCellValueFiltering,
    WrongInstructions,
    WrongCode,
    FormattingTransformations,
    FormattingAnswerType,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::WrongCellValueFiltering,
        ErrorCategory::WrongInstructions,
        ErrorCategory::WrongCode,
        ErrorCategory::FormattingTransformations,
        ErrorCategory::FormattingAnswerType,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::WrongCellValueFiltering => "wrong_cell_value_filtering",
            ErrorCategory::WrongInstructions => "wrong_instructions",
            ErrorCategory::WrongCode => "wrong_code",
            ErrorCategory::FormattingTransformations => "formatting_transformations",
            ErrorCategory::FormattingAnswerType => "formatting_answer_type",
            ErrorCategory::Other => "other",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorCategory::WrongCellValueFiltering => "Wrong cell value filtering",
            ErrorCategory::WrongInstructions => "Wrong instructions",
            ErrorCategory::WrongCode => "Wrong code",
            ErrorCategory::FormattingTransformations => "Formatting transformations",
            ErrorCategory::FormattingAnswerType => "Formatting answer type",
            ErrorCategory::Other => "Other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase().replace([' ', '-'], "_");
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| format!("unknown error category `{s}`"))
    }
}

/// Share of each error category over all traces.
pub fn render_error_tally<'a>(categories: impl IntoIterator<Item = Option<&'a ErrorCategory>>) -> String {
    let mut total = 0usize;
    let mut counts: BTreeMap<ErrorCategory, usize> = BTreeMap::new();
    for c in categories {
        total += 1;
        if let Some(c) = c {
            *counts.entry(*c).or_default() += 1;
        }
    }
    let annotated: usize = counts.values().sum();
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let mut out = format!("{:<30}{:>7}{:>9}\n", "Error category", "Count", "Share");
    for c in ErrorCategory::ALL {
        let n = counts.get(&c).copied().unwrap_or(0);
        out.push_str(&format!("{:<30}{:>7}{:>8.1}%\n", c.label(), n, pct(n)));
    }
    out.push_str(&format!(
        "{:<30}{:>7}{:>8.1}%\n",
        "Not annotated",
        total - annotated,
        pct(total - annotated)
    ));
    out.push_str(&format!("{:<30}{:>7}\n", "Traces", total));
    out
}
