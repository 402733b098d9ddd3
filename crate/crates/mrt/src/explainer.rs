//! Explainer stage: draft a plan, then refine it.

use mrt_core::explain::{build_column_block, parse_instruction_list};
use mrt_core::{InstructionPlan, StageName, TableProfile};

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, Gateway};
use crate::prompts::{vars, PromptSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplainSettings {
    pub unique_listing_threshold: usize,
    pub max_steps: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings { unique_listing_threshold: 7, max_steps: 12 }
    }
}

/// First explainer call; returns the raw draft reply.
pub fn draft_instructions(
    question_id: &str,
    question: &str,
    profile: &TableProfile,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExplainSettings,
) -> Result<String> {
    let prompt = prompts.render_prompt(
        "explainer",
        &vars([
            ("question", question.to_string()),
            ("column_block", build_column_block(profile, settings.unique_listing_threshold)),
        ]),
    )?;
    let req = ChatRequest::new(StageName::Explainer, question_id, prompts.system(StageName::Explainer), prompt);
    Ok(gateway.complete(&req)?.content)
}

/// Refinement call over `draft`. The refined reply wins when it parses to
/// at least one step; otherwise the draft's steps are used, unrefined.
pub fn refine_instructions(
    question_id: &str,
    question: &str,
    profile: &TableProfile,
    draft: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExplainSettings,
) -> Result<InstructionPlan> {
    let draft_steps = parse_instruction_list(draft);
    let prompt = prompts.render_prompt(
        "explainer_refine",
        &vars([
            ("question", question.to_string()),
            ("column_block", build_column_block(profile, settings.unique_listing_threshold)),
            ("draft", draft_steps.join("\n")),
        ]),
    )?;
    let req =
        ChatRequest::new(StageName::ExplainerRefine, question_id, prompts.system(StageName::ExplainerRefine), prompt);
    let refined = parse_instruction_list(&gateway.complete(&req)?.content);
    InstructionPlan::new(question_id, refined, true, settings.max_steps)
        .or_else(|| InstructionPlan::new(question_id, draft_steps, false, settings.max_steps))
        .ok_or(Error::EmptyPlan)
}

/// Draft then refine.
pub fn generate_instructions(
    question_id: &str,
    question: &str,
    profile: &TableProfile,
    gateway: &Gateway,
    prompts: &PromptSet,
    settings: &ExplainSettings,
) -> Result<InstructionPlan> {
    let draft = draft_instructions(question_id, question, profile, gateway, prompts, settings)?;
    refine_instructions(question_id, question, profile, &draft, gateway, prompts, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, Replay, ReplayEntry};
    use mrt_core::stats::compute_table_stats;
    use mrt_core::{StatsOptions, Table};

    fn profile() -> TableProfile {
        let t = Table::from_csv("pokemon", "name,type1,defense\nA,Rock,180\nB,Steel,230\n").unwrap();
        TableProfile {
            table_name: "pokemon".into(),
            table_fingerprint: "f".into(),
            column_profiles: compute_table_stats(&t, StatsOptions::default()),
            fallback_descriptions: false,
        }
    }

    fn gateway(draft: &str, refined: &str) -> Gateway {
        let e = |stage, content: &str| ReplayEntry { stage, content: content.into(), tag: None, prompt_sha256: None };
        Gateway::with_replay(
            GatewayConfig::scripted(),
            Replay::from_entries([e(StageName::Explainer, draft), e(StageName::ExplainerRefine, refined)]),
        )
    }

    #[test]
    fn refined_plan_is_used() {
        let gw = gateway(
            "1. Sort by defense\n2. Take the top row\n3. Look at it\n4. Return type1",
            "['Sort the rows in descending order based on the \"defense\" column',\n 'Select the row at the top of the sorted list',\n 'Access the \"type1\" column of the selected row',\n 'Return the value in the \"type1\" column as the answer.']",
        );
        let plan = generate_instructions("q1", "Which type has the highest defense?", &profile(), &gw, &PromptSet::builtin(), &ExplainSettings::default()).unwrap();
        assert!(plan.refined);
        assert_eq!(plan.steps.len(), 4);
        assert_eq!(plan.steps[0], "Sort the rows in descending order based on the \"defense\" column");
        let log = gw.interactions();
        assert_eq!(log[0].stage, StageName::Explainer);
        assert!(log[0].messages[1].content.contains("- `defense` (int64)"));
        assert!(log[1].messages[1].content.contains("Sort by defense\nTake the top row"));
    }

    #[test]
    fn unparseable_refinement_keeps_the_draft() {
        let gw = gateway("- Count rows", "```\n```");
        let plan = generate_instructions("q", "How many?", &profile(), &gw, &PromptSet::builtin(), &ExplainSettings::default()).unwrap();
        assert!(!plan.refined);
        assert_eq!(plan.steps, vec!["Count rows"]);
    }

    #[test]
    fn both_empty_is_an_error() {
        let gw = gateway("", "");
        let err = generate_instructions("q", "?", &profile(), &gw, &PromptSet::builtin(), &ExplainSettings::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyPlan));
    }
}
