//! Extraction and structural validation of generated dataframe functions.
//!
//! The generated function must look like
//!
//! ```text
//! def parse_dataframe(df: pd.DataFrame) -> str:
//!     ...
//! ```
//!
//! Only a light line-oriented scanner is used here: enough to split top-level
//! statements, read the entry point's parameter list and enforce the
//! group-by ban. Real syntax checking is delegated to the execution harness.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Name of the single function the generated code must define.
pub const ENTRY_POINT: &str = "parse_dataframe";
const ENTRY_DEF: &str = "def parse_dataframe";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoCodeFound;

impl fmt::Display for NoCodeFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no code block or `{ENTRY_DEF}` definition found in the reply")
    }
}

/// Structural problems found before the harness syntax check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeIssue {
    /// No top-level `def` at all.
    NoFunction,
    /// Functions were defined, but none is the entry point.
    MissingEntryPoint { found: Vec<String> },
    /// More than one top-level function.
    MultipleFunctions { names: Vec<String> },
    /// The entry point does not take exactly one parameter.
    WrongArity { params: usize },
    /// A `.groupby(` call appears on the given 1-based line.
    GroupBy { line: usize },
}

impl fmt::Display for CodeIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeIssue::NoFunction => {
                write!(f, "the code does not define a function; define `{ENTRY_DEF}(df)`")
            }
            CodeIssue::MissingEntryPoint { found } => write!(
                f,
                "the function must be named `{ENTRY_POINT}`, found: {}",
                found.join(", ")
            ),
            CodeIssue::MultipleFunctions { names } => write!(
                f,
                "exactly one function must be defined, found {}: {}",
                names.len(),
                names.join(", ")
            ),
            CodeIssue::WrongArity { params } => write!(
                f,
                "`{ENTRY_POINT}` must take exactly one parameter (the dataframe), found {params}"
            ),
            CodeIssue::GroupBy { line } => write!(
                f,
                "line {line}: `.groupby(` is not allowed; use boolean masks, sorting or value_counts instead"
            ),
        }
    }
}

fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.split('\n') {
        if is_fence(line) {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

fn indent_width(line: &str) -> usize {
    line.len() - line.trim_start_matches(' ').len()
}

fn dedent(text: &str) -> String {
    let common = text
        .split('\n')
        .filter(|l| !l.trim().is_empty())
        .map(indent_width)
        .min()
        .unwrap_or(0);
    text.split('\n')
        .map(|l| if l.trim().is_empty() { "" } else { &l[common..] })
        .collect::<Vec<_>>()
        .join("\n")
}

fn tidy(code: &str) -> String {
    let expanded = code.replace('\t', "    ");
    let lines: Vec<&str> = expanded.split('\n').map(str::trim_end).collect();
    let joined = lines.join("\n");
    dedent(joined.trim_matches('\n'))
}

/// Pull the code out of an LLM reply: the first fenced block that mentions the
/// entry point (or else the first fenced block), falling back to everything
/// from the first `def parse_dataframe` line on. Line endings become LF and
/// tabs become four spaces.
pub fn extract_code(reply: &str) -> Result<String, NoCodeFound> {
    let text = normalize_newlines(reply);
    let blocks = fenced_blocks(&text);
    let chosen = blocks
        .iter()
        .find(|b| b.contains(ENTRY_DEF))
        .or_else(|| blocks.iter().find(|b| !b.trim().is_empty()));
    if let Some(block) = chosen {
        return Ok(tidy(block));
    }
    let mut offset = 0;
    for line in text.split('\n') {
        if line.trim_start().starts_with(ENTRY_DEF) {
            return Ok(tidy(&text[offset..]));
        }
        offset += line.len() + 1;
    }
    Err(NoCodeFound)
}

/// Tracks brackets and string literals across lines.
#[derive(Default)]
struct Scanner {
    depth: i32,
    triple: Option<&'static str>,
}

impl Scanner {
    /// Feed one line; returns true if the logical statement continues on the
    /// next line.
    fn feed(&mut self, line: &str) -> bool {
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if let Some(q) = self.triple {
                if bytes[i..].starts_with(q.as_bytes()) {
                    self.triple = None;
                    i += 3;
                } else {
                    i += 1;
                }
                continue;
            }
            match bytes[i] {
                b'#' => break,
                b'"' | b'\'' => {
                    let q = bytes[i];
                    if bytes[i..].starts_with(b"\"\"\"") {
                        self.triple = Some("\"\"\"");
                        i += 3;
                        continue;
                    }
                    if bytes[i..].starts_with(b"'''") {
                        self.triple = Some("'''");
                        i += 3;
                        continue;
                    }
                    i += 1;
                    while i < bytes.len() && bytes[i] != q {
                        if bytes[i] == b'\\' {
                            i += 1;
                        }
                        i += 1;
                    }
                    i += 1;
                }
                b'(' | b'[' | b'{' => {
                    self.depth += 1;
                    i += 1;
                }
                b')' | b']' | b'}' => {
                    self.depth = (self.depth - 1).max(0);
                    i += 1;
                }
                _ => i += 1,
            }
        }
        self.triple.is_some() || self.depth > 0 || line.trim_end().ends_with('\\')
    }
}

struct Statement<'a> {
    lines: Vec<&'a str>,
}

fn top_level_statements(code: &str) -> Vec<Statement<'_>> {
    let mut out: Vec<Statement<'_>> = Vec::new();
    let mut scanner = Scanner::default();
    let mut continuing = false;
    for line in code.split('\n') {
        let trimmed = line.trim();
        // Column-0 comments inside a function body do not end the function.
        let starts_new = !continuing
            && !trimmed.is_empty()
            && !trimmed.starts_with('#')
            && indent_width(line) == 0;
        if starts_new || out.is_empty() {
            out.push(Statement { lines: Vec::new() });
        }
        if let Some(stmt) = out.last_mut() {
            stmt.lines.push(line);
        }
        continuing = scanner.feed(line);
    }
    out
}

/// Statement text without trailing blank lines and column-0 comments.
fn statement_text(lines: &[&str]) -> String {
    let mut end = lines.len();
    while end > 1 {
        let l = lines[end - 1];
        if l.trim().is_empty() || (indent_width(l) == 0 && l.starts_with('#')) {
            end -= 1;
        } else {
            break;
        }
    }
    lines[..end].join("\n").trim_end().to_string()
}

fn def_name(first: &str) -> Option<&str> {
    let rest = first
        .strip_prefix("async def ")
        .or_else(|| first.strip_prefix("def "))?
        .trim_start();
    let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Parameters of the first parenthesized list in a `def` header.
fn parameters(def_text: &str) -> Vec<String> {
    let Some(open) = def_text.find('(') else { return Vec::new() };
    let mut depth = 0i32;
    let mut params = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for ch in def_text[open + 1..].chars() {
        if let Some(q) = quote {
            current.push(ch);
            if ch == q {
                quote = None;
            }
            continue;
        }
        match ch {
            '"' | '\'' => {
                quote = Some(ch);
                current.push(ch);
            }
            '(' | '[' | '{' => {
                depth += 1;
                current.push(ch);
            }
            ')' if depth == 0 => break,
            ')' | ']' | '}' => {
                depth -= 1;
                current.push(ch);
            }
            ',' if depth == 0 => params.push(core::mem::take(&mut current)),
            _ => current.push(ch),
        }
    }
    params.push(current);
    params
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty() && p != "/" && p != "*")
        .collect()
}

/// 1-based line of the first `.groupby(` call, if any.
pub fn find_groupby(code: &str) -> Option<usize> {
    for (idx, line) in code.split('\n').enumerate() {
        let mut rest = line;
        while let Some(pos) = rest.find(".groupby") {
            let after = rest[pos + ".groupby".len()..].trim_start();
            if after.starts_with('(') {
                return Some(idx + 1);
            }
            rest = &rest[pos + 1..];
        }
    }
    None
}

/// Keep only top-level imports and the single entry-point function.
///
/// Other top-level statements (prose, example calls, `if __name__` blocks,
/// comments) are dropped. Extra function definitions, a misnamed or
/// wrong-arity entry point and group-by calls are rejected.
pub fn sanitize(code: &str) -> Result<String, CodeIssue> {
    let mut imports: Vec<String> = Vec::new();
    let mut functions: Vec<(String, String)> = Vec::new();
    let mut decorators: Vec<&str> = Vec::new();
    for stmt in top_level_statements(code) {
        let first = stmt.lines[0].trim_start();
        if first.starts_with("import ") || first.starts_with("from ") {
            imports.push(statement_text(&stmt.lines));
            decorators.clear();
        } else if first.starts_with('@') {
            decorators.extend(stmt.lines.iter().filter(|l| !l.trim().is_empty()));
        } else if let Some(name) = def_name(first) {
            let mut text = String::new();
            for d in decorators.drain(..) {
                text.push_str(d);
                text.push('\n');
            }
            text.push_str(&statement_text(&stmt.lines));
            functions.push((name.to_string(), text));
        } else {
            decorators.clear();
        }
    }
    let names: Vec<String> = functions.iter().map(|(n, _)| n.clone()).collect();
    match functions.len() {
        0 => return Err(CodeIssue::NoFunction),
        1 if names[0] != ENTRY_POINT => {
            return Err(CodeIssue::MissingEntryPoint { found: names })
        }
        1 => {}
        _ => return Err(CodeIssue::MultipleFunctions { names }),
    }
    let (_, function) = functions.remove(0);
    let def_start = function.find("def ").unwrap_or(0);
    let params = parameters(&function[def_start..]);
    if params.len() != 1 || params[0].starts_with('*') {
        return Err(CodeIssue::WrongArity { params: params.len() });
    }
    let mut out = String::new();
    if !imports.is_empty() {
        out.push_str(&imports.join("\n"));
        out.push_str("\n\n");
    }
    out.push_str(&function);
    out.push('\n');
    if let Some(line) = find_groupby(&out) {
        return Err(CodeIssue::GroupBy { line });
    }
    Ok(out)
}

/// Numbered instruction block for the coder prompt.
pub fn numbered_instructions(steps: &[String]) -> String {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n")
}
