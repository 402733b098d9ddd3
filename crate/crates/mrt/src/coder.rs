//! Coder stage: prompt for a `parse_dataframe` function and repair it until
//! it passes structural validation and the harness syntax check.

use mrt_core::code::{extract_code, numbered_instructions, sanitize};
use mrt_core::explain::build_column_block;
use mrt_core::{InstructionPlan, StageName, TableProfile};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::harness::{Harness, HarnessError};
use crate::prompts::{vars, PromptSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeArtifact {
    pub source: String,
    /// Validations performed, the accepted one included.
    pub attempts: u32,
    pub repaired: bool,
    pub syntax_ok: bool,
    /// Diagnostics of the rejected candidates, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CoderError {
    #[error("code still invalid after {attempts} check(s): {diagnostic}")]
    RepairExhausted { attempts: u32, diagnostic: String, diagnostics: Vec<String> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Other(#[from] Error),
}

impl From<mrt_core::TemplateError> for CoderError {
    fn from(e: mrt_core::TemplateError) -> Self {
        CoderError::Other(e.into())
    }
}

/// User prompt for the coder stage. `feedback` carries the error of a
/// previous execution.
pub fn build_coder_prompt(
    prompts: &PromptSet,
    plan: &InstructionPlan,
    profile: &TableProfile,
    unique_listing_threshold: usize,
    feedback: Option<&str>,
) -> Result<String, mrt_core::TemplateError> {
    let feedback = match feedback {
        Some(err) => format!(
            "\nA previous version of the function failed when it was executed, with this error:\n{err}\nWrite a corrected function that avoids this error.\n"
        ),
        None => String::new(),
    };
    prompts.render_prompt(
        "coder",
        &vars([
            ("instructions", numbered_instructions(&plan.steps)),
            ("column_block", build_column_block(profile, unique_listing_threshold)),
            ("feedback", feedback),
        ]),
    )
}

fn candidate_from_reply(reply: &str) -> String {
    // A reply with no recognizable code still goes through validation so the
    // repair loop can report what is wrong with it.
    extract_code(reply).unwrap_or_else(|_| reply.trim().to_string())
}

fn validate(code: &str, harness: &mut dyn Harness) -> Result<Result<String, String>, HarnessError> {
    let clean = match sanitize(code) {
        Ok(c) => c,
        Err(issue) => return Ok(Err(issue.to_string())),
    };
    let verdict = harness.check(&clean)?;
    if verdict.ok {
        Ok(Ok(clean))
    } else {
        Ok(Err(verdict.error_text()))
    }
}

/// Validate `candidate`, asking the repair stage to fix it at most
/// `max_repair_attempts` times.
pub fn check_and_repair(
    question_id: &str,
    candidate: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
    harness: &mut dyn Harness,
    max_repair_attempts: u32,
) -> Result<CodeArtifact, CoderError> {
    let mut code = candidate.to_string();
    let mut diagnostics = Vec::new();
    let mut repairs = 0;
    loop {
        match validate(&code, harness)? {
            Ok(source) => {
                return Ok(CodeArtifact {
                    source,
                    attempts: repairs + 1,
                    repaired: repairs > 0,
                    syntax_ok: true,
                    diagnostics,
                })
            }
            Err(diagnostic) => {
                diagnostics.push(diagnostic.clone());
                if repairs >= max_repair_attempts {
                    return Err(CoderError::RepairExhausted { attempts: repairs + 1, diagnostic, diagnostics });
                }
                repairs += 1;
                let prompt = prompts.render_prompt(
                    "coder_repair",
                    &vars([("code", code.clone()), ("diagnostic", diagnostic)]),
                )?;
                let req = ChatRequest::new(
                    StageName::CoderRepair,
                    question_id,
                    prompts.system(StageName::CoderRepair),
                    prompt,
                );
                code = candidate_from_reply(&gateway.complete(&req)?.content);
            }
        }
    }
}

/// Coder call followed by validation and repair.
#[allow(clippy::too_many_arguments)]
pub fn generate_code(
    question_id: &str,
    plan: &InstructionPlan,
    profile: &TableProfile,
    feedback: Option<&str>,
    gateway: &Gateway,
    prompts: &PromptSet,
    harness: &mut dyn Harness,
    unique_listing_threshold: usize,
    max_repair_attempts: u32,
) -> Result<CodeArtifact, CoderError> {
    let prompt = build_coder_prompt(prompts, plan, profile, unique_listing_threshold, feedback)?;
    let req = ChatRequest::new(StageName::Coder, question_id, prompts.system(StageName::Coder), prompt);
    let reply = gateway.complete(&req)?;
    check_and_repair(question_id, &candidate_from_reply(&reply.content), gateway, prompts, harness, max_repair_attempts)
}
