//! Table question answering: profile a CSV table, plan with an LLM, generate
//! and run pandas code in a supervised Python process, then type and format
//! the answer. The pure logic lives in [`mrt_core`]; this crate adds I/O,
//! the LLM gateway, the harness client, configuration and the CLI.

pub mod coder;
pub mod config;
pub mod error;
pub mod eval_io;
pub mod explainer;
pub mod gateway;
pub mod harness;
pub mod interpreter;
pub mod pipeline;
pub mod profiler;
pub mod prompts;
pub mod runner;
pub mod table_io;
pub mod trace;

pub use error::{Error, Result};
pub use mrt_core;
