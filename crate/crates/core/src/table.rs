//! In-memory table model, column kind inference and prompt excerpts.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::csv::{self, CsvDocument, CsvError};
use crate::num::{fmt_real, parse_num, NumToken};

/// Upper bound on distinct values for a text column to count as categorical,
/// regardless of its cardinality ratio.
pub const CATEGORICAL_MAX_UNIQUE: usize = 20;
/// Upper bound on unique / non-missing for a text column to count as categorical.
pub const CATEGORICAL_MAX_RATIO: f64 = 0.5;

/// Sentinel used for missing cells in serialized excerpts.
pub const NA_SENTINEL: &str = "<NA>";
/// Marker appended to truncated cells in serialized excerpts.
pub const ELLIPSIS: char = '\u{2026}';

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    /// Interpret one raw CSV field. Empty fields are missing.
    pub fn parse(raw: &str) -> Cell {
        if raw.is_empty() {
            return Cell::Missing;
        }
        match parse_num(raw) {
            Some(NumToken::Int(v)) => return Cell::Int(v),
            Some(NumToken::Real(v)) => return Cell::Real(v),
            None => {}
        }
        if raw.eq_ignore_ascii_case("true") {
            Cell::Bool(true)
        } else if raw.eq_ignore_ascii_case("false") {
            Cell::Bool(false)
        } else {
            Cell::Text(raw.to_string())
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Real(v) => Some(*v),
            _ => None,
        }
    }

    /// Display form used in excerpts, frequency tables and distinct counts.
    /// `None` for missing cells.
    pub fn display(&self) -> Option<String> {
        match self {
            Cell::Missing => None,
            Cell::Bool(true) => Some("True".to_string()),
            Cell::Bool(false) => Some("False".to_string()),
            Cell::Int(v) => Some(v.to_string()),
            Cell::Real(v) => Some(fmt_real(*v)),
            Cell::Text(s) => Some(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Boolean,
    Integer,
    Real,
    Categorical,
    Text,
    DateLike,
}

impl ColumnKind {
    /// Dataframe-style dtype label shown to the LLM.
    pub fn type_label(self) -> &'static str {
        match self {
            ColumnKind::Boolean => "bool",
            ColumnKind::Integer => "int64",
            ColumnKind::Real => "float64",
            ColumnKind::Categorical => "category",
            ColumnKind::Text => "object",
            ColumnKind::DateLike => "datetime64",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnKind::Integer | ColumnKind::Real)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Vec<Cell>,
}

impl Column {
    /// Build a column from parsed cells, inferring its kind and normalizing the
    /// cells so that every one is representable in that kind.
    pub fn from_raw(name: String, raw: &[String]) -> Column {
        let parsed: Vec<Cell> = raw.iter().map(|r| Cell::parse(r)).collect();
        let kind = infer_column_kind(&parsed);
        let cells = match kind {
            ColumnKind::Integer | ColumnKind::Boolean => parsed,
            ColumnKind::Real => parsed
                .into_iter()
                .map(|c| match c {
                    Cell::Int(v) => Cell::Real(v as f64),
                    other => other,
                })
                .collect(),
            ColumnKind::Categorical | ColumnKind::Text | ColumnKind::DateLike => raw
                .iter()
                .map(|r| if r.is_empty() { Cell::Missing } else { Cell::Text(r.clone()) })
                .collect(),
        };
        Column { name, kind, cells }
    }

    pub fn non_missing(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_missing()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: usize,
}

impl Table {
    /// Build a table from a tokenized CSV document.
    pub fn from_document(name: &str, doc: &CsvDocument) -> Table {
        let header = unique_headers(&doc.header);
        let row_count = doc.records.len();
        let columns = header
            .into_iter()
            .enumerate()
            .map(|(i, col_name)| {
                let raw: Vec<String> = doc.records.iter().map(|r| r[i].clone()).collect();
                Column::from_raw(col_name, &raw)
            })
            .collect();
        Table { name: name.to_string(), columns, row_count }
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Table, CsvError> {
        let doc = csv::parse(text)?;
        Ok(Table::from_document(name, &doc))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// Make header names unique and non-empty: empty names become `Unnamed: <i>`,
/// repeats get `__2`, `__3`, ... in reading order.
pub fn unique_headers(header: &[String]) -> Vec<String> {
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::with_capacity(header.len());
    for (i, name) in header.iter().enumerate() {
        let base = if name.is_empty() { format!("Unnamed: {i}") } else { name.clone() };
        let chosen = if used.contains(&base) {
            let mut k = 2;
            loop {
                let candidate = format!("{base}__{k}");
                if !used.contains(&candidate) {
                    break candidate;
                }
                k += 1;
            }
        } else {
            base
        };
        used.insert(chosen.clone());
        out.push(chosen);
    }
    out
}

const BOOLEAN_PAIRS: [(&str, &str); 5] =
    [("true", "false"), ("yes", "no"), ("y", "n"), ("t", "f"), ("1", "0")];

fn boolean_token(cell: &Cell) -> Option<String> {
    match cell {
        Cell::Bool(true) => Some("true".to_string()),
        Cell::Bool(false) => Some("false".to_string()),
        Cell::Int(v) => Some(v.to_string()),
        Cell::Text(s) => Some(s.trim().to_lowercase()),
        Cell::Real(_) | Cell::Missing => None,
    }
}

fn is_boolean(non_missing: &[&Cell]) -> bool {
    let mut tokens = BTreeSet::new();
    for cell in non_missing {
        match boolean_token(cell) {
            Some(t) => {
                tokens.insert(t);
            }
            None => return false,
        }
    }
    BOOLEAN_PAIRS.iter().any(|(t, f)| {
        let within = tokens.iter().all(|x| x == t || x == f);
        // A lone 0 or 1 is an integer column, not a flag.
        let numeric_pair = *t == "1";
        within && (!numeric_pair || tokens.len() == 2)
    })
}

fn digits(s: &[u8]) -> bool {
    !s.is_empty() && s.iter().all(u8::is_ascii_digit)
}

/// ISO-8601 date (`YYYY-MM-DD`) with an optional time part.
pub fn is_iso_date(text: &str) -> bool {
    let b = text.trim().as_bytes();
    if b.len() < 10 || !digits(&b[0..4]) || b[4] != b'-' || !digits(&b[5..7]) || b[7] != b'-' {
        return false;
    }
    if !digits(&b[8..10]) {
        return false;
    }
    let month = (b[5] - b'0') * 10 + (b[6] - b'0');
    let day = (b[8] - b'0') * 10 + (b[9] - b'0');
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return false;
    }
    let rest = &b[10..];
    if rest.is_empty() {
        return true;
    }
    if rest[0] != b'T' && rest[0] != b' ' {
        return false;
    }
    let time = &rest[1..];
    if time.len() < 5 || !digits(&time[0..2]) || time[2] != b':' || !digits(&time[3..5]) {
        return false;
    }
    time[5..]
        .iter()
        .all(|c| c.is_ascii_digit() || matches!(c, b':' | b'.' | b'Z' | b'+' | b'-'))
}

/// Decide a column's kind from its parsed cells.
pub fn infer_column_kind(cells: &[Cell]) -> ColumnKind {
    let non_missing: Vec<&Cell> = cells.iter().filter(|c| !c.is_missing()).collect();
    if non_missing.is_empty() {
        return ColumnKind::Text;
    }
    if is_boolean(&non_missing) {
        return ColumnKind::Boolean;
    }
    if non_missing.iter().all(|c| matches!(c, Cell::Int(_))) {
        return ColumnKind::Integer;
    }
    if non_missing.iter().all(|c| matches!(c, Cell::Int(_) | Cell::Real(_))) {
        return ColumnKind::Real;
    }
    if non_missing
        .iter()
        .all(|c| matches!(c, Cell::Text(s) if is_iso_date(s)))
    {
        return ColumnKind::DateLike;
    }
    let distinct: BTreeSet<String> = non_missing.iter().filter_map(|c| c.display()).collect();
    let unique = distinct.len();
    if unique <= CATEGORICAL_MAX_UNIQUE
        || (unique as f64) <= CATEGORICAL_MAX_RATIO * non_missing.len() as f64
    {
        ColumnKind::Categorical
    } else {
        ColumnKind::Text
    }
}

fn excerpt_cell(text: &str, max_chars: usize) -> String {
    let mut out = String::new();
    for (i, ch) in text.chars().enumerate() {
        if i == max_chars {
            out.push(ELLIPSIS);
            break;
        }
        match ch {
            '\n' | '\r' => out.push(' '),
            '|' => out.push_str("\\|"),
            other => out.push(other),
        }
    }
    out
}

/// Pipe-delimited excerpt: the header line followed by the first
/// `min(max_rows, row_count)` rows.
pub fn serialize_subset(table: &Table, max_rows: usize, max_cell_chars: usize) -> String {
    let max_rows = max_rows.max(1);
    let max_cell_chars = max_cell_chars.max(1);
    let mut lines: Vec<String> = Vec::new();
    let header: Vec<String> =
        table.columns.iter().map(|c| excerpt_cell(&c.name, usize::MAX)).collect();
    lines.push(header.join(" | "));
    for row in 0..table.row_count.min(max_rows) {
        let cells: Vec<String> = table
            .columns
            .iter()
            .map(|c| match c.cells[row].display() {
                None => NA_SENTINEL.to_string(),
                Some(text) => excerpt_cell(&text, max_cell_chars),
            })
            .collect();
        lines.push(cells.join(" | "));
    }
    lines.join("\n")
}
