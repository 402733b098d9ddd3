//! Interpreter stage: decide the answer type and coerce the raw value.

use mrt_core::interpret::{coerce_by_rules, parse_type_label};
use mrt_core::{AnswerType, RawValue, StageName, TypedAnswer};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gateway::{ChatRequest, Gateway};
use crate::prompts::{vars, PromptSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeSource {
    /// Given by the manifest; no LLM call.
    Manifest,
    Llm,
    /// Neither reply named a type.
    Default,
}

/// Ask for the answer type, re-asking once; Category when both replies are
/// unrecognized.
pub fn infer_answer_type(
    question_id: &str,
    question: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<(AnswerType, TypeSource)> {
    let prompt = prompts.render_prompt("interpreter_type", &vars([("question", question.to_string())]))?;
    let req =
        ChatRequest::new(StageName::InterpreterType, question_id, prompts.system(StageName::InterpreterType), prompt);
    for _ in 0..2 {
        if let Some(t) = parse_type_label(&gateway.complete(&req)?.content) {
            return Ok((t, TypeSource::Llm));
        }
    }
    log::warn!("{question_id}: answer type not recognized, defaulting to Category");
    Ok((AnswerType::Category, TypeSource::Default))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coercion {
    pub answer: TypedAnswer,
    /// The LLM rewrite was needed.
    pub llm_used: bool,
    /// Neither pass produced the target shape; `answer` is the raw value as
    /// a Category string.
    pub failed: bool,
}

/// Read an LLM rewrite: JSON when it parses, otherwise the trimmed text.
pub fn parse_rewrite(reply: &str) -> RawValue {
    let t = reply.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .and_then(|r| r.strip_suffix("```"))
        .map_or(t, str::trim);
    serde_json::from_str::<RawValue>(t).unwrap_or_else(|_| RawValue::Str(t.to_string()))
}

/// Rules first, then one LLM rewrite parsed by the same rules.
pub fn coerce_answer(
    question_id: &str,
    question: &str,
    raw: &RawValue,
    target: AnswerType,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Coercion> {
    if let Some(answer) = coerce_by_rules(raw, target) {
        return Ok(Coercion { answer, llm_used: false, failed: false });
    }
    let prompt = prompts.render_prompt(
        "interpreter_coerce",
        &vars([
            ("question", question.to_string()),
            ("value", raw.to_json()),
            ("answer_type", target.display_name().to_string()),
        ]),
    )?;
    let req = ChatRequest::new(
        StageName::InterpreterCoerce,
        question_id,
        prompts.system(StageName::InterpreterCoerce),
        prompt,
    );
    let rewritten = parse_rewrite(&gateway.complete(&req)?.content);
    if let Some(mut answer) = coerce_by_rules(&rewritten, target) {
        answer.coerced = true;
        return Ok(Coercion { answer, llm_used: true, failed: false });
    }
    log::warn!("{question_id}: cannot coerce {} to {}", raw.to_json(), target.display_name());
    let mut answer = TypedAnswer::category(raw.to_plain_string());
    answer.coerced = true;
    Ok(Coercion { answer, llm_used: true, failed: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, Replay, ReplayEntry};
    use mrt_core::{AnswerValue, Number};

    fn gateway(stage: StageName, replies: &[&str]) -> Gateway {
        Gateway::with_replay(
            GatewayConfig::scripted(),
            Replay::from_entries(replies.iter().map(|c| ReplayEntry {
                stage,
                content: c.to_string(),
                tag: None,
                prompt_sha256: None,
            })),
        )
    }

    #[test]
    fn type_labels() {
        let p = PromptSet::builtin();
        let gw = gateway(StageName::InterpreterType, &["Boolean", "list of numbers", "banana", "banana"]);
        assert_eq!(infer_answer_type("q", "?", &gw, &p).unwrap(), (AnswerType::Boolean, TypeSource::Llm));
        assert_eq!(infer_answer_type("q", "?", &gw, &p).unwrap(), (AnswerType::ListNumber, TypeSource::Llm));
        assert_eq!(infer_answer_type("q", "?", &gw, &p).unwrap(), (AnswerType::Category, TypeSource::Default));
        assert_eq!(gw.call_count(), 4);
    }

    #[test]
    fn rules_need_no_call() {
        let gw = gateway(StageName::InterpreterCoerce, &[]);
        let c = coerce_answer("q", "?", &RawValue::Float(0.2748), AnswerType::Number, &gw, &PromptSet::builtin())
            .unwrap();
        assert_eq!(c.answer.value, AnswerValue::Number(Number::Real(0.2748)));
        assert!(!c.answer.coerced && !c.llm_used);
        assert_eq!(gw.call_count(), 0);
    }

    #[test]
    fn llm_rewrite_is_parsed_by_the_rules() {
        let gw = gateway(StageName::InterpreterCoerce, &["```json\n[3, 4]\n```"]);
        let raw = RawValue::Str("three and four".into());
        let c = coerce_answer("q", "?", &raw, AnswerType::ListNumber, &gw, &PromptSet::builtin()).unwrap();
        assert_eq!(c.answer.value, AnswerValue::NumberList(vec![Number::Int(3), Number::Int(4)]));
        assert!(c.llm_used && c.answer.coerced && !c.failed);
        let prompt = &gw.interactions()[0].messages[1].content;
        assert!(prompt.contains("\"three and four\"") && prompt.contains("ListNumber"), "{prompt}");
    }

    #[test]
    fn failed_coercion_keeps_the_raw_text() {
        let gw = gateway(StageName::InterpreterCoerce, &["no"]);
        let raw = RawValue::Str("lots".into());
        let c = coerce_answer("q", "?", &raw, AnswerType::Number, &gw, &PromptSet::builtin()).unwrap();
        assert!(c.failed);
        assert_eq!(c.answer, TypedAnswer { coerced: true, ..TypedAnswer::category("lots") });
    }
}
