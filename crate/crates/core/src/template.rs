//! `{{name}}` placeholder substitution.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateError {
    UnknownTemplate(String),
    UnboundPlaceholder(String),
}

impl fmt::Display for TemplateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateError::UnknownTemplate(name) => write!(f, "unknown prompt template `{name}`"),
            TemplateError::UnboundPlaceholder(name) => {
                write!(f, "placeholder `{{{{{name}}}}}` has no value")
            }
        }
    }
}

impl core::error::Error for TemplateError {}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Substitute every `{{name}}` in one left-to-right pass. Substituted values
/// are never rescanned; extra variables are ignored. Braces that do not
/// enclose a placeholder name are copied verbatim.
pub fn render(template: &str, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_placeholder_name(after[..close].trim()) => {
                let name = after[..close].trim();
                let value = vars
                    .get(name)
                    .ok_or_else(|| TemplateError::UnboundPlaceholder(String::from(name)))?;
                out.push_str(value);
                rest = &after[close + 2..];
            }
            _ => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
