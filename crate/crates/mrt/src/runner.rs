//! Runner stage: execute accepted code and feed failures back to the coder.

use std::path::Path;

use mrt_core::{InstructionPlan, TableProfile};
use serde::{Deserialize, Serialize};

use crate::coder::{generate_code, CodeArtifact, CoderError};
use crate::error::Result;
use crate::gateway::Gateway;
use crate::harness::{ExecutionOutcome, Harness, HarnessError};
use crate::prompts::PromptSet;

/// Error types reported for attempts that never reached a successful run.
pub const REPAIR_EXHAUSTED: &str = "RepairExhausted";
pub const HARNESS_CRASHED: &str = "HarnessCrashed";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub max_runtime_retries: u32,
    pub max_repair_attempts: u32,
    pub timeout_s: f64,
    pub unique_listing_threshold: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { max_runtime_retries: 3, max_repair_attempts: 4, timeout_s: 30.0, unique_listing_threshold: 7 }
    }
}

/// One generate-and-execute round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// Absent when the coder could not produce valid code.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeArtifact>,
    pub outcome: ExecutionOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: ExecutionOutcome,
    pub code_used: Option<CodeArtifact>,
    pub runtime_retries: u32,
    pub attempts: Vec<Attempt>,
}

/// Run `code` once.
pub fn execute(
    code: &CodeArtifact,
    table_path: &Path,
    harness: &mut dyn Harness,
    timeout_s: f64,
) -> Result<ExecutionOutcome, HarnessError> {
    harness.run(&code.source, table_path, timeout_s)
}

/// Generate, execute, and regenerate with the error text on failure, at
/// most `max_runtime_retries` times. Failing to produce valid code and a
/// crashed harness count as failed rounds. Only gateway errors abort.
#[allow(clippy::too_many_arguments)]
pub fn run_with_retries(
    question_id: &str,
    plan: &InstructionPlan,
    profile: &TableProfile,
    table_path: &Path,
    gateway: &Gateway,
    prompts: &PromptSet,
    harness: &mut dyn Harness,
    settings: &RunSettings,
) -> Result<RunResult> {
    let mut attempts = Vec::new();
    let mut feedback: Option<String> = None;
    let mut retries = 0;
    loop {
        let generated = generate_code(
            question_id,
            plan,
            profile,
            feedback.as_deref(),
            gateway,
            prompts,
            harness,
            settings.unique_listing_threshold,
            settings.max_repair_attempts,
        );
        let (code, outcome) = match generated {
            Ok(code) => {
                let outcome = match execute(&code, table_path, harness, settings.timeout_s) {
                    Ok(o) => o,
                    Err(e) => crashed(e),
                };
                (Some(code), outcome)
            }
            Err(CoderError::RepairExhausted { diagnostic, .. }) => {
                (None, ExecutionOutcome::failure(REPAIR_EXHAUSTED, diagnostic))
            }
            Err(CoderError::Harness(e)) => (None, crashed(e)),
            Err(CoderError::Gateway(e)) => return Err(e.into()),
            Err(CoderError::Other(e)) => return Err(e),
        };
        let ok = outcome.ok;
        feedback = Some(outcome.error_text());
        attempts.push(Attempt { code, outcome });
        if ok || retries >= settings.max_runtime_retries {
            let last = attempts.last().expect("at least one attempt");
            return Ok(RunResult {
                outcome: last.outcome.clone(),
                code_used: last.code.clone(),
                runtime_retries: retries,
                attempts,
            });
        }
        retries += 1;
    }
}

fn crashed(e: HarnessError) -> ExecutionOutcome {
    log::warn!("{e}");
    ExecutionOutcome::failure(HARNESS_CRASHED, e.to_string())
}
