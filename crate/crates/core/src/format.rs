//! Final rule-based normalization of typed answers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::answer::{AnswerValue, Number, TypedAnswer};
use crate::interpret::coerce_by_rules;
use crate::num::{is_integral, round_to};

/// Default number of decimals kept for non-integral reals.
pub const DEFAULT_DECIMALS: u32 = 2;

fn format_number(n: Number, decimals: u32) -> Number {
    match n {
        Number::Int(v) => Number::Int(v),
        Number::Real(v) => {
            let rounded = round_to(v, decimals);
            if is_integral(rounded) {
                Number::Int(rounded as i64)
            } else {
                Number::Real(rounded)
            }
        }
    }
}

fn strip_text(s: &str) -> String {
    let mut t = s.trim();
    loop {
        let before = t;
        for q in ['"', '\'', '`'] {
            if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
                t = t[1..t.len() - 1].trim();
            }
        }
        if t == before {
            break;
        }
    }
    t.to_string()
}

fn normalize(value: &AnswerValue, decimals: u32) -> AnswerValue {
    match value {
        AnswerValue::Bool(b) => AnswerValue::Bool(*b),
        AnswerValue::Number(n) => AnswerValue::Number(format_number(*n, decimals)),
        AnswerValue::Text(s) => AnswerValue::Text(strip_text(s)),
        AnswerValue::NumberList(v) => {
            AnswerValue::NumberList(v.iter().map(|n| format_number(*n, decimals)).collect())
        }
        AnswerValue::TextList(v) => {
            AnswerValue::TextList(v.iter().map(|s| strip_text(s)).collect::<Vec<_>>())
        }
    }
}

/// Normalize an answer for comparison with gold labels. Reals that are
/// integral after rounding to `decimals` are demoted to integers, the rest are
/// rounded half away from zero. Strings lose surrounding whitespace and
/// quotes. Payloads whose shape does not match the answer type (tuple
/// strings, boolean spellings) are reshaped with the interpreter rules, both
/// before and after normalizing, so that a real rounding to 0 or 1 under a
/// boolean type is settled in one pass.
/// The answer type and element order never change.
pub fn format_answer(answer: &TypedAnswer, decimals: u32) -> TypedAnswer {
    let reshape = |v: &AnswerValue| coerce_by_rules(&v.to_raw(), answer.answer_type).map(|a| a.value);
    let mut value = if answer.is_well_shaped() {
        normalize(&answer.value, decimals)
    } else {
        normalize(&reshape(&answer.value).unwrap_or_else(|| answer.value.clone()), decimals)
    };
    if value.shape() != answer.answer_type {
        if let Some(v) = reshape(&value) {
            value = normalize(&v, decimals);
        }
    }
    TypedAnswer { answer_type: answer.answer_type, value, coerced: answer.coerced }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerType;
    use alloc::vec;

    fn fmt(a: TypedAnswer) -> TypedAnswer {
        format_answer(&a, DEFAULT_DECIMALS)
    }

    #[test]
    fn boolean_settles_after_rounding() {
        let a = TypedAnswer {
            answer_type: AnswerType::Boolean,
            value: AnswerValue::Number(Number::Real(-8.3e-9)),
            coerced: false,
        };
        assert_eq!(fmt(a).value, AnswerValue::Bool(false));
    }

    #[test]
    fn rounds_and_demotes() {
        assert_eq!(
            fmt(TypedAnswer::number(Number::Real(0.2748))).value,
            AnswerValue::Number(Number::Real(0.27))
        );
        assert_eq!(
            fmt(TypedAnswer::number(Number::Real(2.999))).value,
            AnswerValue::Number(Number::Int(3))
        );
        assert_eq!(
            fmt(TypedAnswer::number(Number::Real(-0.001))).value,
            AnswerValue::Number(Number::Int(0))
        );
    }

    #[test]
    fn strips_text() {
        assert_eq!(
            fmt(TypedAnswer::category("  '\"Fire\"' ")).value,
            AnswerValue::Text("Fire".into())
        );
        assert_eq!(
            fmt(TypedAnswer::list_category(vec![" a ", "'b'"])).value,
            AnswerValue::TextList(vec!["a".into(), "b".into()])
        );
    }

    #[test]
    fn reshapes_ill_shaped_payloads() {
        let a = TypedAnswer {
            answer_type: AnswerType::Boolean,
            value: AnswerValue::Text("yes".into()),
            coerced: false,
        };
        assert_eq!(fmt(a).value, AnswerValue::Bool(true));
        // Unfixable payloads pass through with the type untouched.
        let b = TypedAnswer {
            answer_type: AnswerType::Number,
            value: AnswerValue::Text("n/a".into()),
            coerced: false,
        };
        let out = fmt(b);
        assert_eq!(out.answer_type, AnswerType::Number);
        assert_eq!(out.value, AnswerValue::Text("n/a".into()));
    }

    #[test]
    fn custom_decimals() {
        assert_eq!(
            format_answer(&TypedAnswer::number(Number::Real(5.43216)), 3).value,
            AnswerValue::Number(Number::Real(5.432))
        );
    }
}
