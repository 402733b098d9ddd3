//! Pure building blocks of the table question answering pipeline.
//!
//! Everything in this crate is deterministic and free of IO: table model and
//! CSV tokenizing, column statistics, prompt rendering, instruction and code
//! parsing, answer coercion and formatting, voting and scoring. The `mrt`
//! crate wires these together with an LLM gateway and an execution harness.

#![no_std]

extern crate alloc;

pub mod answer;
pub mod code;
pub mod csv;
pub mod eval;
pub mod explain;
pub mod format;
pub mod interpret;
pub mod stage;
pub mod stats;
pub mod table;
pub mod template;

mod num;

pub use answer::{AnswerType, AnswerValue, Number, RawValue, TypedAnswer};
pub use code::{CodeIssue, NoCodeFound};
pub use csv::CsvError;
pub use eval::{EvalReport, ErrorCategory};
pub use explain::InstructionPlan;
pub use stage::StageName;
pub use stats::{ColumnProfile, StatsOptions, TableProfile};
pub use table::{Cell, Column, ColumnKind, Table};
pub use template::TemplateError;
