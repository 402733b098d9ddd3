//! Answer-type labels and rule-based coercion of raw values.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::answer::{AnswerType, AnswerValue, Number, RawValue, TypedAnswer};
use crate::num::{fmt_real, parse_num, NumToken};

// Longest phrases first so that "list of numbers" wins over "number".
const LABELS: &[(&str, AnswerType)] = &[
    ("list of categories", AnswerType::ListCategory),
    ("list of categorical", AnswerType::ListCategory),
    ("list of strings", AnswerType::ListCategory),
    ("list of string", AnswerType::ListCategory),
    ("list[category]", AnswerType::ListCategory),
    ("list[string]", AnswerType::ListCategory),
    ("list_category", AnswerType::ListCategory),
    ("listcategory", AnswerType::ListCategory),
    ("list_cat", AnswerType::ListCategory),
    ("list of numbers", AnswerType::ListNumber),
    ("list of number", AnswerType::ListNumber),
    ("list of integers", AnswerType::ListNumber),
    ("list of floats", AnswerType::ListNumber),
    ("list[number]", AnswerType::ListNumber),
    ("numeric list", AnswerType::ListNumber),
    ("list_number", AnswerType::ListNumber),
    ("listnumber", AnswerType::ListNumber),
    ("list_num", AnswerType::ListNumber),
    ("true or false", AnswerType::Boolean),
    ("true/false", AnswerType::Boolean),
    ("yes/no", AnswerType::Boolean),
    ("categorical", AnswerType::Category),
    ("category", AnswerType::Category),
    ("boolean", AnswerType::Boolean),
    ("integer", AnswerType::Number),
    ("numeric", AnswerType::Number),
    ("number", AnswerType::Number),
    ("string", AnswerType::Category),
    ("float", AnswerType::Number),
    ("text", AnswerType::Category),
    ("bool", AnswerType::Boolean),
];

fn normalize_label(text: &str) -> String {
    let lowered = text.trim().to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| {
        c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '*' | '.' | ':' | '!')
    });
    let mut out = String::with_capacity(trimmed.len());
    let mut last_space = false;
    for ch in trimmed.chars() {
        if ch.is_whitespace() {
            if !last_space {
                out.push(' ');
            }
            last_space = true;
        } else {
            out.push(ch);
            last_space = false;
        }
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Map a free-text type label to an [`AnswerType`].
///
/// An exact match against the label table wins; otherwise the reply is
/// scanned for label phrases on word boundaries, and it resolves only when
/// every phrase found names the same type.
pub fn parse_type_label(reply: &str) -> Option<AnswerType> {
    let norm = normalize_label(reply);
    if norm.is_empty() {
        return None;
    }
    if let Some((_, t)) = LABELS.iter().find(|(label, _)| *label == norm) {
        return Some(*t);
    }
    let mut haystack: Vec<char> = norm.chars().collect();
    let mut found: Option<AnswerType> = None;
    for (label, ty) in LABELS {
        let needle: Vec<char> = label.chars().collect();
        let mut i = 0;
        while i + needle.len() <= haystack.len() {
            if haystack[i..i + needle.len()] == needle[..] {
                let before_ok = i == 0 || !is_word_char(haystack[i - 1]);
                let after = i + needle.len();
                // Allow a plural "s" after scalar labels ("numbers", "strings").
                let after_ok = after == haystack.len()
                    || !is_word_char(haystack[after])
                    || (haystack[after] == 's'
                        && (after + 1 == haystack.len() || !is_word_char(haystack[after + 1])));
                if before_ok && after_ok {
                    match found {
                        Some(prev) if prev != *ty => return None,
                        _ => found = Some(*ty),
                    }
                    for c in &mut haystack[i..i + needle.len()] {
                        *c = ' ';
                    }
                }
            }
            i += 1;
        }
    }
    found
}

fn strip_quotes(s: &str) -> &str {
    let t = s.trim();
    for q in ['"', '\'', '`'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return t[1..t.len() - 1].trim();
        }
    }
    t
}

/// Boolean spelling table shared with column kind inference.
pub fn bool_from_str(s: &str) -> Option<bool> {
    match strip_quotes(s).to_lowercase().as_str() {
        "true" | "yes" | "y" | "t" | "1" => Some(true),
        "false" | "no" | "n" | "f" | "0" => Some(false),
        _ => None,
    }
}

fn number_from_str(s: &str) -> Option<Number> {
    match parse_num(strip_quotes(s))? {
        NumToken::Int(v) => Some(Number::Int(v)),
        NumToken::Real(v) => Some(Number::Real(v)),
    }
}

fn unwrap_brackets(s: &str) -> &str {
    let t = s.trim();
    for (open, close) in [('[', ']'), ('(', ')'), ('{', '}')] {
        if t.len() >= 2 && t.starts_with(open) && t.ends_with(close) {
            return t[1..t.len() - 1].trim();
        }
    }
    t
}

/// Split a comma-joined string into trimmed items, honoring quoted segments.
/// An empty (or bracket-only) string yields no items.
pub fn split_list(s: &str) -> Vec<String> {
    let body = unwrap_brackets(s);
    if body.is_empty() {
        return Vec::new();
    }
    let mut items = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for ch in body.chars() {
        if escaped {
            escaped = false;
            current.push(ch);
            continue;
        }
        match quote {
            // Inside quotes a backslash takes the next character literally.
            Some(_) if ch == '\\' => escaped = true,
            Some(q) if ch == q => {
                quote = None;
                current.push(ch);
            }
            Some(_) => current.push(ch),
            None if ch == '"' || ch == '\'' => {
                quote = Some(ch);
                current.push(ch);
            }
            None if ch == ',' => {
                items.push(strip_quotes(&current).to_string());
                current.clear();
            }
            None => current.push(ch),
        }
    }
    let last = strip_quotes(&current).to_string();
    // Trailing comma as in Python tuples: "(1,)".
    if !(last.is_empty() && !items.is_empty() && current.trim().is_empty()) {
        items.push(last);
    }
    items
}

fn scalar_text(raw: &RawValue) -> Option<(String, bool)> {
    match raw {
        RawValue::Str(s) => Some((s.clone(), false)),
        RawValue::Int(v) => Some((v.to_string(), true)),
        RawValue::Float(v) if v.is_finite() => Some((fmt_real(*v), true)),
        RawValue::Bool(true) => Some(("True".to_string(), true)),
        RawValue::Bool(false) => Some(("False".to_string(), true)),
        _ => None,
    }
}

fn scalar_number(raw: &RawValue) -> Option<(Number, bool)> {
    match raw {
        RawValue::Int(v) => Some((Number::Int(*v), false)),
        RawValue::Float(v) if v.is_finite() => Some((Number::Real(*v), false)),
        RawValue::Str(s) => number_from_str(s).map(|n| (n, true)),
        _ => None,
    }
}

fn rules(raw: &RawValue, target: AnswerType) -> Option<(AnswerValue, bool)> {
    match target {
        AnswerType::Boolean => match raw {
            RawValue::Bool(b) => Some((AnswerValue::Bool(*b), false)),
            RawValue::Int(0) => Some((AnswerValue::Bool(false), true)),
            RawValue::Int(1) => Some((AnswerValue::Bool(true), true)),
            RawValue::Float(v) if *v == 0.0 || *v == 1.0 => {
                Some((AnswerValue::Bool(*v == 1.0), true))
            }
            RawValue::Str(s) => bool_from_str(s).map(|b| (AnswerValue::Bool(b), true)),
            RawValue::List(items) if items.len() == 1 => {
                rules(&items[0], target).map(|(v, _)| (v, true))
            }
            _ => None,
        },
        AnswerType::Number => match raw {
            RawValue::List(items) if items.len() == 1 => {
                rules(&items[0], target).map(|(v, _)| (v, true))
            }
            other => scalar_number(other).map(|(n, c)| (AnswerValue::Number(n), c)),
        },
        AnswerType::Category => match raw {
            RawValue::List(items) if items.len() == 1 => {
                rules(&items[0], target).map(|(v, _)| (v, true))
            }
            other => scalar_text(other).map(|(s, c)| (AnswerValue::Text(s), c)),
        },
        AnswerType::ListNumber => match raw {
            RawValue::List(items) => {
                let mut changed = false;
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let (n, c) = scalar_number(item)?;
                    changed |= c;
                    out.push(n);
                }
                Some((AnswerValue::NumberList(out), changed))
            }
            RawValue::Str(s) => split_list(s)
                .iter()
                .map(|item| number_from_str(item))
                .collect::<Option<Vec<_>>>()
                .map(|v| (AnswerValue::NumberList(v), true)),
            RawValue::Int(_) | RawValue::Float(_) => {
                scalar_number(raw).map(|(n, _)| (AnswerValue::NumberList(alloc::vec![n]), true))
            }
            _ => None,
        },
        AnswerType::ListCategory => match raw {
            RawValue::List(items) => {
                let mut changed = false;
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let (s, c) = scalar_text(item)?;
                    changed |= c;
                    out.push(s);
                }
                Some((AnswerValue::TextList(out), changed))
            }
            RawValue::Str(s) => Some((AnswerValue::TextList(split_list(s)), true)),
            RawValue::Int(_) | RawValue::Float(_) | RawValue::Bool(_) => {
                scalar_text(raw).map(|(s, _)| (AnswerValue::TextList(alloc::vec![s]), true))
            }
            _ => None,
        },
    }
}

/// Rule pass of answer coercion. `None` when the rules cannot produce the
/// target shape; `coerced` reports whether shape or representation changed.
pub fn coerce_by_rules(raw: &RawValue, target: AnswerType) -> Option<TypedAnswer> {
    rules(raw, target).map(|(value, coerced)| TypedAnswer { answer_type: target, value, coerced })
}
