//! Answer values: raw execution results and the five typed answer shapes.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::num::fmt_real;

/// The task's closed set of answer types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnswerType {
    Boolean,
    Number,
    Category,
    ListNumber,
    ListCategory,
}

impl AnswerType {
    pub const ALL: [AnswerType; 5] = [
        AnswerType::Boolean,
        AnswerType::Number,
        AnswerType::Category,
        AnswerType::ListNumber,
        AnswerType::ListCategory,
    ];

    /// Label used in prediction and gold files.
    pub fn wire_name(self) -> &'static str {
        match self {
            AnswerType::Boolean => "boolean",
            AnswerType::Number => "number",
            AnswerType::Category => "category",
            AnswerType::ListNumber => "list[number]",
            AnswerType::ListCategory => "list[category]",
        }
    }

    /// Label used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            AnswerType::Boolean => "Boolean",
            AnswerType::Number => "Number",
            AnswerType::Category => "Category",
            AnswerType::ListNumber => "ListNumber",
            AnswerType::ListCategory => "ListCategory",
        }
    }

    pub fn is_list(self) -> bool {
        matches!(self, AnswerType::ListNumber | AnswerType::ListCategory)
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAnswerType(pub String);

impl fmt::Display for UnknownAnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown answer type `{}`", self.0)
    }
}

impl core::error::Error for UnknownAnswerType {}

impl FromStr for AnswerType {
    type Err = UnknownAnswerType;

    /// Accepts the wire names, the report names and the free-text synonyms
    /// understood by the interpreter.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        crate::interpret::parse_type_label(s).ok_or_else(|| UnknownAnswerType(s.to_owned()))
    }
}

impl Serialize for AnswerType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.wire_name())
    }
}

impl<'de> Deserialize<'de> for AnswerType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A number that remembers whether it was spelled as an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Int(i64),
    Real(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(v) => v as f64,
            Number::Real(v) => v,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Int(v) => write!(f, "{v}"),
            Number::Real(v) => f.write_str(&fmt_real(*v)),
        }
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Int(v) => serializer.serialize_i64(*v),
            Number::Real(v) => serializer.serialize_f64(*v),
        }
    }
}

/// Value of an executed function, as reported by the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<RawValue>),
    /// Anything without a JSON-native shape, carried as its string rendering.
    Other(String),
}

impl RawValue {
    /// Short kind label matching the harness `value_kind` field.
    pub fn kind(&self) -> &'static str {
        match self {
            RawValue::Null => "null",
            RawValue::Bool(_) => "bool",
            RawValue::Int(_) => "int",
            RawValue::Float(_) => "float",
            RawValue::Str(_) => "string",
            RawValue::List(_) => "list",
            RawValue::Other(_) => "other",
        }
    }

    /// JSON rendering (non-finite floats and `Other` become strings).
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        self.write_json(&mut out);
        out
    }

    fn write_json(&self, out: &mut String) {
        match self {
            RawValue::Null => out.push_str("null"),
            RawValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            RawValue::Int(v) => out.push_str(&v.to_string()),
            RawValue::Float(v) if v.is_finite() => out.push_str(&fmt_real(*v)),
            RawValue::Float(v) => write_json_str(&fmt_real(*v), out),
            RawValue::Str(s) | RawValue::Other(s) => write_json_str(s, out),
            RawValue::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_json(out);
                }
                out.push(']');
            }
        }
    }

    /// Plain rendering used when an answer has to be shown as text.
    pub fn to_plain_string(&self) -> String {
        match self {
            RawValue::Str(s) | RawValue::Other(s) => s.clone(),
            RawValue::Bool(true) => "True".to_string(),
            RawValue::Bool(false) => "False".to_string(),
            RawValue::Null => "None".to_string(),
            other => other.to_json(),
        }
    }
}

fn write_json_str(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&alloc::format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

impl Serialize for RawValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            RawValue::Null => serializer.serialize_unit(),
            RawValue::Bool(b) => serializer.serialize_bool(*b),
            RawValue::Int(v) => serializer.serialize_i64(*v),
            RawValue::Float(v) if v.is_finite() => serializer.serialize_f64(*v),
            RawValue::Float(v) => serializer.serialize_str(&fmt_real(*v)),
            RawValue::Str(s) | RawValue::Other(s) => serializer.serialize_str(s),
            RawValue::List(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
        }
    }
}

struct RawVisitor;

impl<'de> Visitor<'de> for RawVisitor {
    type Value = RawValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E>(self) -> Result<RawValue, E> {
        Ok(RawValue::Null)
    }
    fn visit_none<E>(self) -> Result<RawValue, E> {
        Ok(RawValue::Null)
    }
    fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<RawValue, D::Error> {
        RawValue::deserialize(d)
    }
    fn visit_bool<E>(self, v: bool) -> Result<RawValue, E> {
        Ok(RawValue::Bool(v))
    }
    fn visit_i64<E>(self, v: i64) -> Result<RawValue, E> {
        Ok(RawValue::Int(v))
    }
    fn visit_u64<E>(self, v: u64) -> Result<RawValue, E> {
        Ok(i64::try_from(v).map(RawValue::Int).unwrap_or(RawValue::Float(v as f64)))
    }
    fn visit_f64<E>(self, v: f64) -> Result<RawValue, E> {
        Ok(RawValue::Float(v))
    }
    fn visit_str<E>(self, v: &str) -> Result<RawValue, E> {
        Ok(RawValue::Str(v.to_owned()))
    }
    fn visit_string<E>(self, v: String) -> Result<RawValue, E> {
        Ok(RawValue::Str(v))
    }
    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<RawValue, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element::<RawValue>()? {
            items.push(item);
        }
        Ok(RawValue::List(items))
    }
    fn visit_map<A: de::MapAccess<'de>>(self, mut map: A) -> Result<RawValue, A::Error> {
        let mut keys = Vec::new();
        while let Some((k, _)) = map.next_entry::<String, de::IgnoredAny>()? {
            keys.push(k);
        }
        Ok(RawValue::Other(alloc::format!("{{{}}}", keys.join(", "))))
    }
}

impl<'de> Deserialize<'de> for RawValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RawVisitor)
    }
}

/// Payload of a typed answer.
#[derive(Debug, Clone, PartialEq)]
pub enum AnswerValue {
    Bool(bool),
    Number(Number),
    Text(String),
    NumberList(Vec<Number>),
    TextList(Vec<String>),
}

impl AnswerValue {
    /// The answer type whose shape this value has.
    pub fn shape(&self) -> AnswerType {
        match self {
            AnswerValue::Bool(_) => AnswerType::Boolean,
            AnswerValue::Number(_) => AnswerType::Number,
            AnswerValue::Text(_) => AnswerType::Category,
            AnswerValue::NumberList(_) => AnswerType::ListNumber,
            AnswerValue::TextList(_) => AnswerType::ListCategory,
        }
    }

    pub fn to_raw(&self) -> RawValue {
        fn num(n: &Number) -> RawValue {
            match n {
                Number::Int(v) => RawValue::Int(*v),
                Number::Real(v) => RawValue::Float(*v),
            }
        }
        match self {
            AnswerValue::Bool(b) => RawValue::Bool(*b),
            AnswerValue::Number(n) => num(n),
            AnswerValue::Text(s) => RawValue::Str(s.clone()),
            AnswerValue::NumberList(v) => RawValue::List(v.iter().map(num).collect()),
            AnswerValue::TextList(v) => {
                RawValue::List(v.iter().map(|s| RawValue::Str(s.clone())).collect())
            }
        }
    }
}

impl Serialize for AnswerValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            AnswerValue::Bool(b) => serializer.serialize_bool(*b),
            AnswerValue::Number(n) => n.serialize(serializer),
            AnswerValue::Text(s) => serializer.serialize_str(s),
            AnswerValue::NumberList(v) => {
                let mut seq = serializer.serialize_seq(Some(v.len()))?;
                for n in v {
                    seq.serialize_element(n)?;
                }
                seq.end()
            }
            AnswerValue::TextList(v) => {
                let mut seq = serializer.serialize_seq(Some(v.len()))?;
                for s in v {
                    seq.serialize_element(s)?;
                }
                seq.end()
            }
        }
    }
}

/// A value tagged with one of the five answer types. The payload's shape
/// always equals `answer_type`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypedAnswer {
    pub answer_type: AnswerType,
    pub value: AnswerValue,
    #[serde(skip)]
    pub coerced: bool,
}

impl TypedAnswer {
    /// `None` when the payload's shape does not match `answer_type`.
    pub fn new(answer_type: AnswerType, value: AnswerValue) -> Option<TypedAnswer> {
        (value.shape() == answer_type).then_some(TypedAnswer { answer_type, value, coerced: false })
    }

    pub fn from_value(value: AnswerValue) -> TypedAnswer {
        TypedAnswer { answer_type: value.shape(), value, coerced: false }
    }

    pub fn boolean(b: bool) -> TypedAnswer {
        TypedAnswer::from_value(AnswerValue::Bool(b))
    }

    pub fn number(n: Number) -> TypedAnswer {
        TypedAnswer::from_value(AnswerValue::Number(n))
    }

    pub fn category(s: impl Into<String>) -> TypedAnswer {
        TypedAnswer::from_value(AnswerValue::Text(s.into()))
    }

    pub fn list_number(v: Vec<Number>) -> TypedAnswer {
        TypedAnswer::from_value(AnswerValue::NumberList(v))
    }

    pub fn list_category<S: Into<String>>(v: Vec<S>) -> TypedAnswer {
        TypedAnswer::from_value(AnswerValue::TextList(v.into_iter().map(Into::into).collect()))
    }

    pub fn is_well_shaped(&self) -> bool {
        self.value.shape() == self.answer_type
    }
}

#[derive(Deserialize)]
struct TypedAnswerRepr {
    answer_type: AnswerType,
    value: RawValue,
}

impl<'de> Deserialize<'de> for TypedAnswer {
    /// Values whose spelling does not match the declared type (e.g. `"True"`
    /// for a boolean) are normalized with the interpreter's rules.
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TypedAnswerRepr::deserialize(deserializer)?;
        crate::interpret::coerce_by_rules(&repr.value, repr.answer_type)
            .map(|mut a| {
                a.coerced = false;
                a
            })
            .ok_or_else(|| {
                de::Error::custom(alloc::format!(
                    "value {} does not fit answer type {}",
                    repr.value.to_json(),
                    repr.answer_type.wire_name()
                ))
            })
    }
}
