//! RFC-4180 tokenizer.
//!
//! A blank line is a record holding one empty field. Whether that is a
//! missing cell or noise depends on the header width, so [`parse`] keeps it
//! for single-column tables and drops it otherwise.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsvError {
    /// The input has no header line.
    Empty,
    /// A quoted field is never closed. `row` is the 1-based record where it opens.
    UnbalancedQuote { row: usize },
    /// A closing quote is followed by something other than a delimiter or newline.
    StrayQuote { row: usize },
    /// A record's field count differs from the header's.
    InconsistentColumns { row: usize, expected: usize, found: usize },
}

impl CsvError {
    pub fn row(&self) -> Option<usize> {
        match self {
            CsvError::Empty => None,
            CsvError::UnbalancedQuote { row }
            | CsvError::StrayQuote { row }
            | CsvError::InconsistentColumns { row, .. } => Some(*row),
        }
    }
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvError::Empty => write!(f, "no header row"),
            CsvError::UnbalancedQuote { row } => write!(f, "row {row}: unbalanced quote"),
            CsvError::StrayQuote { row } => {
                write!(f, "row {row}: unexpected character after closing quote")
            }
            CsvError::InconsistentColumns { row, expected, found } => {
                write!(f, "row {row}: expected {expected} fields, found {found}")
            }
        }
    }
}

/// Parsed CSV document: header plus body records, all of header width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvDocument {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

struct RawRecord {
    fields: Vec<String>,
    row: usize,
    blank: bool,
}

fn tokenize(text: &str) -> Result<Vec<RawRecord>, CsvError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut records = Vec::new();
    let mut chars = text.chars().peekable();
    let mut row = 1usize;

    while chars.peek().is_some() {
        let mut fields = Vec::new();
        let mut field = String::new();
        let mut any_char = false;
        loop {
            let Some(c) = chars.next() else {
                fields.push(core::mem::take(&mut field));
                break;
            };
            any_char = true;
            match c {
                '"' if field.is_empty() => {
                    // Quoted field.
                    loop {
                        match chars.next() {
                            None => return Err(CsvError::UnbalancedQuote { row }),
                            Some('"') => {
                                if chars.peek() == Some(&'"') {
                                    chars.next();
                                    field.push('"');
                                } else {
                                    break;
                                }
                            }
                            Some(ch) => field.push(ch),
                        }
                    }
                    match chars.peek() {
                        None | Some(',') | Some('\n') | Some('\r') => {}
                        Some(_) => return Err(CsvError::StrayQuote { row }),
                    }
                }
                ',' => fields.push(core::mem::take(&mut field)),
                '\r' => {
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    fields.push(core::mem::take(&mut field));
                    break;
                }
                '\n' => {
                    fields.push(core::mem::take(&mut field));
                    break;
                }
                other => field.push(other),
            }
        }
        let blank = any_char && fields.len() == 1 && fields[0].is_empty();
        records.push(RawRecord { fields, row, blank });
        row += 1;
    }
    Ok(records)
}

/// Parse a whole CSV document whose first record is the header.
pub fn parse(text: &str) -> Result<CsvDocument, CsvError> {
    let mut records = tokenize(text)?.into_iter();
    let header = loop {
        match records.next() {
            None => return Err(CsvError::Empty),
            Some(r) if r.blank => continue,
            Some(r) => break r.fields,
        }
    };
    let width = header.len();
    let mut body = Vec::new();
    for record in records {
        if record.blank && width > 1 {
            continue;
        }
        if record.fields.len() != width {
            return Err(CsvError::InconsistentColumns {
                row: record.row,
                expected: width,
                found: record.fields.len(),
            });
        }
        body.push(record.fields);
    }
    Ok(CsvDocument { header, records: body })
}


fn needs_quotes(field: &str) -> bool {
    field.contains([',', '"', '\n', '\r']) || field.starts_with(' ') || field.ends_with(' ')
}

/// Render one record with RFC-4180 quoting, without a line terminator.
pub fn write_record(fields: &[String]) -> String {
    let mut out = String::new();
    for (i, field) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        if needs_quotes(field) {
            out.push('"');
            out.push_str(&field.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(field);
        }
    }
    out
}

/// Render a whole document, `\n`-terminated.
pub fn write(doc: &CsvDocument) -> String {
    let mut out = write_record(&doc.header);
    out.push('\n');
    for record in &doc.records {
        out.push_str(&write_record(record));
        out.push('\n');
    }
    out
}
