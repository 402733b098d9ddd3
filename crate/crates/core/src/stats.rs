//! Per-column statistics and the descriptor stage's reply format.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::num::fmt_real;
use crate::table::{Column, ColumnKind, Table};

/// Separator between column name and description in descriptor replies.
pub const DESCRIPTION_SEPARATOR: &str = ":::";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsOptions {
    /// Length cap of `freq_values`.
    pub top_k: usize,
    /// Columns with fewer distinct values than this also record all of them.
    pub listing_threshold: usize,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions { top_k: 5, listing_threshold: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub type_label: String,
    pub missing_values: usize,
    pub unique: usize,
    pub flag_binary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_values: Option<Vec<(String, usize)>>,
    /// Every distinct value, recorded only for low-cardinality non-numeric columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_values: Option<Vec<String>>,
    #[serde(default)]
    pub description: String,
}

impl ColumnProfile {
    pub fn kind(&self) -> ColumnKind {
        match self.type_label.as_str() {
            "bool" => ColumnKind::Boolean,
            "int64" => ColumnKind::Integer,
            "float64" => ColumnKind::Real,
            "category" => ColumnKind::Categorical,
            "datetime64" => ColumnKind::DateLike,
            _ => ColumnKind::Text,
        }
    }

    pub fn has_missing(&self) -> bool {
        self.missing_values > 0
    }

    /// Render a bound (min or max) the way the column's values are spelled.
    pub fn render_bound(&self, value: f64) -> String {
        if self.kind() == ColumnKind::Integer && libm::trunc(value) == value {
            format!("{}", value as i64)
        } else {
            fmt_real(value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub table_name: String,
    /// Hex SHA-256 of the table's bytes.
    pub table_fingerprint: String,
    pub column_profiles: Vec<ColumnProfile>,
    /// Set when the descriptor reply could not be parsed and every column got
    /// the fallback description.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub fallback_descriptions: bool,
}

impl TableProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.column_profiles.iter().find(|c| c.name == name)
    }
}

/// Statistics for one column; `description` is left empty.
pub fn compute_column_stats(column: &Column, options: StatsOptions) -> ColumnProfile {
    let kind = column.kind;
    let missing_values = column.cells.iter().filter(|c| c.is_missing()).count();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for cell in &column.cells {
        if let Some(text) = cell.display() {
            *counts.entry(text).or_insert(0) += 1;
        }
    }
    let unique = counts.len();

    let (mean, std, min, max) = if kind.is_numeric() {
        let values: Vec<f64> = column.cells.iter().filter_map(|c| c.as_f64()).collect();
        if values.is_empty() {
            (None, None, None, None)
        } else {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                libm::sqrt(ss / (n - 1.0))
            } else {
                0.0
            };
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Some(mean), Some(std), Some(min), Some(max))
        }
    } else {
        (None, None, None, None)
    };

    let lists_values = matches!(
        kind,
        ColumnKind::Categorical | ColumnKind::Boolean | ColumnKind::Text
    );
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let distinct_values = (lists_values && unique < options.listing_threshold)
        .then(|| ranked.iter().map(|(v, _)| v.clone()).collect());
    let freq_values = lists_values.then(|| {
        ranked.truncate(options.top_k);
        ranked
    });

    ColumnProfile {
        name: column.name.clone(),
        type_label: kind.type_label().to_string(),
        missing_values,
        unique,
        flag_binary: kind == ColumnKind::Boolean,
        mean,
        std,
        min,
        max,
        freq_values,
        distinct_values,
        description: String::new(),
    }
}

/// Statistics for every column, in table order.
pub fn compute_table_stats(table: &Table, options: StatsOptions) -> Vec<ColumnProfile> {
    table.columns.iter().map(|c| compute_column_stats(c, options)).collect()
}

/// Description used when the LLM gave none for a column.
pub fn fallback_description(name: &str, type_label: &str) -> String {
    format!("column `{name}` of type `{type_label}`")
}

/// One line of statistics per column, for the descriptor prompt.
pub fn stats_block(profiles: &[ColumnProfile]) -> String {
    let mut lines = Vec::with_capacity(profiles.len());
    for p in profiles {
        let mut line = format!(
            "- {} ({}): missing_values={}, unique={}",
            p.name, p.type_label, p.missing_values, p.unique
        );
        if let (Some(mean), Some(std), Some(min), Some(max)) = (p.mean, p.std, p.min, p.max) {
            line.push_str(&format!(
                ", mean={}, std={}, min={}, max={}",
                fmt_real(mean),
                fmt_real(std),
                p.render_bound(min),
                p.render_bound(max)
            ));
        }
        if let Some(freq) = &p.freq_values {
            let shown: Vec<String> = freq.iter().map(|(v, c)| format!("{v} ({c})")).collect();
            line.push_str(&format!(", frequent values: {}", shown.join(", ")));
        }
        lines.push(line);
    }
    lines.join("\n")
}

fn clean_name(raw: &str) -> &str {
    let mut s = raw.trim();
    for prefix in ["- ", "* ", "\u{2022} "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_start();
        }
    }
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            s = r.trim_start();
        }
    }
    s.trim_matches(|c: char| c == '`' || c == '"' || c == '\'' || c == '*').trim()
}

/// Parse a `<column name> ::: <description>` reply into a name → description
/// map restricted to `columns`. Code fences and surrounding whitespace are
/// tolerated. `None` when no line names a known column.
pub fn parse_descriptions(reply: &str, columns: &[&str]) -> Option<BTreeMap<String, String>> {
    let known: BTreeSet<&str> = columns.iter().copied().collect();
    let mut out = BTreeMap::new();
    for line in reply.lines() {
        let line = line.trim();
        if line.starts_with("```") {
            continue;
        }
        let Some((name, description)) = line.split_once(DESCRIPTION_SEPARATOR) else {
            continue;
        };
        let name = clean_name(name);
        let description = description.trim();
        if description.is_empty() {
            continue;
        }
        let resolved = if known.contains(name) {
            Some(name)
        } else {
            columns.iter().copied().find(|c| c.eq_ignore_ascii_case(name))
        };
        if let Some(col) = resolved {
            out.entry(col.to_string()).or_insert_with(|| description.to_string());
        }
    }
    (!out.is_empty()).then_some(out)
}

/// Attach descriptions, using the fallback for any column the map lacks.
pub fn apply_descriptions(
    profiles: &mut [ColumnProfile],
    descriptions: Option<&BTreeMap<String, String>>,
) {
    for p in profiles {
        p.description = descriptions
            .and_then(|d| d.get(&p.name))
            .cloned()
            .unwrap_or_else(|| fallback_description(&p.name, &p.type_label));
    }
}
