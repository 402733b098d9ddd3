//! Column block for the explainer prompt and parsing of instruction lists.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::interpret::split_list;
use crate::stats::{ColumnProfile, TableProfile};
use crate::table::ColumnKind;

/// Columns with fewer distinct values than this list them all.
pub const DEFAULT_UNIQUE_LISTING_THRESHOLD: usize = 7;
pub const DEFAULT_MAX_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPlan {
    pub question_id: String,
    pub steps: Vec<String>,
    pub refined: bool,
    /// The parsed list was longer than the step cap and got cut.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub truncated: bool,
}

impl InstructionPlan {
    /// `None` when `steps` is empty; steps past `max_steps` are dropped and
    /// recorded in `truncated`.
    pub fn new(
        question_id: &str,
        mut steps: Vec<String>,
        refined: bool,
        max_steps: usize,
    ) -> Option<InstructionPlan> {
        if steps.is_empty() {
            return None;
        }
        let max_steps = max_steps.max(1);
        let truncated = steps.len() > max_steps;
        steps.truncate(max_steps);
        Some(InstructionPlan { question_id: question_id.to_string(), steps, refined, truncated })
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn column_line(p: &ColumnProfile, threshold: usize) -> String {
    let description = if p.description.is_empty() {
        String::new()
    } else {
        format!(" {}", one_line(&p.description))
    };
    let mut line = format!(
        "- `{}` ({}):{}; missing values: {}",
        one_line(&p.name),
        p.type_label,
        description,
        if p.has_missing() { "yes" } else { "no" }
    );
    let kind = p.kind();
    if kind.is_numeric() {
        if let (Some(min), Some(max)) = (p.min, p.max) {
            line.push_str(&format!("; range [{}, {}]", p.render_bound(min), p.render_bound(max)));
        }
    } else if matches!(kind, ColumnKind::Categorical | ColumnKind::Boolean | ColumnKind::Text) {
        let all = p.distinct_values.as_ref().filter(|v| v.len() == p.unique);
        match all {
            Some(values) if p.unique < threshold => {
                let shown: Vec<String> = values.iter().map(|v| one_line(v)).collect();
                line.push_str(&format!("; values: {}", shown.join(", ")));
            }
            _ => {
                if let Some(freq) = &p.freq_values {
                    let shown: Vec<String> = freq.iter().map(|(v, _)| one_line(v)).collect();
                    line.push_str(&format!("; most frequent values: {}", shown.join(", ")));
                }
            }
        }
    }
    line
}

/// One line per column: name, description, type, missing flag, plus the
/// numeric range or the (frequent) values.
pub fn build_column_block(profile: &TableProfile, unique_listing_threshold: usize) -> String {
    profile
        .column_profiles
        .iter()
        .map(|p| column_line(p, unique_listing_threshold))
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_marker(s: &str) -> Option<&str> {
    let t = s.trim_start();
    for bullet in ['-', '*', '\u{2022}', '+', '\u{2013}', '\u{2014}', '>'] {
        if let Some(rest) = t.strip_prefix(bullet) {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                return Some(rest.trim_start());
            }
        }
    }
    let (prefix_len, body) = if t.get(..5).is_some_and(|p| p.eq_ignore_ascii_case("step ")) {
        (5, &t[5..])
    } else {
        (0, t)
    };
    let digits = body.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &body[digits..];
        for sep in ['.', ')', ':'] {
            if let Some(after) = rest.strip_prefix(sep) {
                if after.is_empty() || after.starts_with(char::is_whitespace) {
                    return Some(after.trim_start());
                }
            }
        }
        if prefix_len > 0 && (rest.is_empty() || rest.starts_with(char::is_whitespace)) {
            return Some(rest.trim_start());
        }
    }
    if let Some(inner) = t.strip_prefix('(') {
        let digits = inner.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits > 0 && inner[digits..].starts_with(')') {
            return Some(inner[digits + 1..].trim_start());
        }
    }
    None
}

fn strip_wrapping(s: &str) -> &str {
    let mut t = s.trim().trim_end_matches(',').trim();
    for q in ['"', '\'', '`'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            t = t[1..t.len() - 1].trim();
        }
    }
    t
}

/// Remove markers and wrapping until the step is stable. Returns the cleaned
/// step and whether a marker was present.
fn clean_step(line: &str) -> (String, bool) {
    let mut current = one_line(line);
    let mut marked = false;
    loop {
        let mut next = strip_wrapping(&current).to_string();
        if let Some(rest) = strip_marker(&next) {
            marked = true;
            next = rest.to_string();
        }
        if next == current {
            return (current, marked);
        }
        current = next;
    }
}

/// Split an LLM reply into instruction strings.
///
/// Enumeration markers, bullets, surrounding quotes and whitespace are
/// stripped and empty lines dropped. A reply shaped like a list literal
/// (`['step one', 'step two']`) is read item by item. An unmarked line
/// ending in `:` that comes before the first marked line is treated as
/// preamble and dropped.
pub fn parse_instruction_list(text: &str) -> Vec<String> {
    let body: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let joined = body.join("\n");
    let trimmed = joined.trim();
    if trimmed.starts_with('[') && trimmed.ends_with(']') {
        return split_list(trimmed)
            .iter()
            .map(|item| clean_step(item).0)
            .filter(|s| !s.is_empty() && !s.starts_with("```"))
            .collect();
    }

    let cleaned: Vec<(String, bool)> = body
        .iter()
        .map(|l| clean_step(l))
        // A fence left after marker removal is still a fence.
        .filter(|(s, _)| !s.is_empty() && !s.starts_with("```"))
        .collect();
    let first_marked = cleaned.iter().position(|(_, marked)| *marked);
    cleaned
        .into_iter()
        .enumerate()
        .filter(|(i, (step, marked))| {
            let preamble = !marked
                && step.ends_with(':')
                && first_marked.is_some_and(|first| *i < first);
            !preamble
        })
        .map(|(_, (step, _))| step)
        .collect()
}

/// Quoted names (`"x"` or `` `x` ``) in the steps that are not columns of the
/// profile.
pub fn unknown_column_references(steps: &[String], profile: &TableProfile) -> Vec<String> {
    let known: BTreeSet<&str> = profile.column_profiles.iter().map(|c| c.name.as_str()).collect();
    let mut unknown = BTreeSet::new();
    for step in steps {
        for quote in ['"', '`'] {
            let parts: Vec<&str> = step.split(quote).collect();
            // Odd positions are inside quotes when the quotes are balanced.
            if parts.len().is_multiple_of(2) {
                continue;
            }
            for inner in parts.iter().skip(1).step_by(2) {
                let name = inner.trim();
                if !name.is_empty() && !known.contains(name) && looks_like_identifier(name) {
                    unknown.insert(name.to_string());
                }
            }
        }
    }
    unknown.into_iter().collect()
}

// Quoted cell values ("Fire", "Yes") are common in steps; only identifier-ish
// tokens are treated as column references.
fn looks_like_identifier(s: &str) -> bool {
    s.contains('_') && s.chars().all(|c| c.is_alphanumeric() || c == '_')
}
