//! Prompt templates, one file per stage.
//!
//! A template file holds the system prompt, a line containing only `---`,
//! then the user prompt. The shipped files are compiled in; a prompts
//! directory given in the configuration replaces any of them by name.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mrt_core::template::{self, TemplateError};
use mrt_core::StageName;

use crate::error::{Error, Result};

const BUILTIN: [(StageName, &str); 7] = [
    (StageName::Descriptor, include_str!("../prompts/descriptor.txt")),
    (StageName::Explainer, include_str!("../prompts/explainer.txt")),
    (StageName::ExplainerRefine, include_str!("../prompts/explainer_refine.txt")),
    (StageName::Coder, include_str!("../prompts/coder.txt")),
    (StageName::CoderRepair, include_str!("../prompts/coder_repair.txt")),
    (StageName::InterpreterType, include_str!("../prompts/interpreter_type.txt")),
    (StageName::InterpreterCoerce, include_str!("../prompts/interpreter_coerce.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub system: String,
    pub user: String,
}

impl Template {
    pub fn parse(text: &str) -> Template {
        let text = text.replace("\r\n", "\n");
        let mut system = Vec::new();
        let mut lines = text.lines();
        let mut found = false;
        for line in lines.by_ref() {
            if line.trim_end() == "---" {
                found = true;
                break;
            }
            system.push(line);
        }
        if !found {
            return Template { system: String::new(), user: text.trim_end().to_string() };
        }
        let user: Vec<&str> = lines.collect();
        Template { system: system.join("\n").trim().to_string(), user: user.join("\n").trim_end().to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, Template>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> PromptSet {
        let templates =
            BUILTIN.iter().map(|(stage, text)| (stage.as_str().to_string(), Template::parse(text))).collect();
        PromptSet { templates }
    }

    /// Built-in templates, with `<stage>.txt` files from `dir` taking
    /// precedence.
    pub fn with_overrides(dir: &Path) -> Result<PromptSet> {
        let mut set = PromptSet::builtin();
        for stage in StageName::ALL {
            let path = dir.join(format!("{stage}.txt"));
            match fs::read_to_string(&path) {
                Ok(text) => {
                    set.templates.insert(stage.as_str().to_string(), Template::parse(&text));
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(Error::io(path, e)),
            }
        }
        Ok(set)
    }

    pub fn template(&self, name: &str) -> Result<&Template, TemplateError> {
        self.templates.get(name).ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))
    }

    /// Render the user prompt of `name`.
    pub fn render_prompt(
        &self,
        name: &str,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        template::render(&self.template(name)?.user, vars)
    }

    pub fn system(&self, stage: StageName) -> &str {
        self.templates.get(stage.as_str()).map_or("", |t| t.system.as_str())
    }
}

/// Variable map from string pairs.
pub fn vars<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
