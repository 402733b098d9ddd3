//! Run configuration: a TOML document plus `MRT_` environment overrides.
//!
//! `MRT_THRESHOLDS__MAX_ROWS=5` sets `thresholds.max_rows`; segments are
//! separated by a double underscore and lowercased. Values are read as TOML
//! when they parse (numbers, booleans, arrays) and as strings otherwise.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mrt_core::eval::CompareOptions;
use mrt_core::StatsOptions;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{GatewayConfig, API_KEY_ENV};
use crate::harness::HarnessSettings;

pub const ENV_PREFIX: &str = "MRT_";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "sequential")]
    Sequential,
    /// Every question finishes stage k before any question starts stage k+1.
    #[serde(rename = "stage-batched")]
    StageBatched,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::StageBatched => "stage-batched",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('_', "-").as_str() {
            "sequential" => Ok(Mode::Sequential),
            "stage-batched" | "batched" => Ok(Mode::StageBatched),
            other => Err(format!("unknown mode `{other}` (expected sequential or stage-batched)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub unique_listing_threshold: usize,
    pub max_repair_attempts: u32,
    pub max_runtime_retries: u32,
    pub timeout_s: f64,
    pub max_rows: usize,
    pub max_cell_chars: usize,
    pub top_k: usize,
    pub max_steps: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            unique_listing_threshold: 7,
            max_repair_attempts: 4,
            max_runtime_retries: 3,
            timeout_s: 30.0,
            max_rows: 10,
            max_cell_chars: 60,
            top_k: 5,
            max_steps: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatterConfig {
    pub enabled: bool,
    pub decimals: u32,
}

impl Default for FormatterConfig {
    fn default() -> Self {
        FormatterConfig { enabled: true, decimals: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ordered_lists: bool,
    pub decimals: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { ordered_lists: false, decimals: 2 }
    }
}

impl EvalConfig {
    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions { decimals: self.decimals, ordered_lists: self.ordered_lists }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Off makes traces byte-identical across runs.
    pub record_timings: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { record_timings: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub command: Vec<String>,
    pub startup_timeout_s: f64,
    pub op_timeout_s: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        let d = HarnessSettings::default();
        HarnessConfig { command: d.command, startup_timeout_s: d.startup_timeout_s, op_timeout_s: d.op_timeout_s }
    }
}

impl HarnessConfig {
    pub fn settings(&self) -> HarnessSettings {
        HarnessSettings {
            command: self.command.clone(),
            startup_timeout_s: self.startup_timeout_s,
            op_timeout_s: self.op_timeout_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Directory of `<stage>.txt` files replacing the built-in prompts.
    pub prompts_dir: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub formatter: FormatterConfig,
    pub eval: EvalConfig,
    pub trace: TraceConfig,
    pub harness: HarnessConfig,
    pub gateway: GatewayConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Sequential,
            workers: 1,
            cache_dir: Some(PathBuf::from(".mrt-cache")),
            output_dir: PathBuf::from("mrt-out"),
            prompts_dir: None,
            thresholds: Thresholds::default(),
            formatter: FormatterConfig::default(),
            eval: EvalConfig::default(),
            trace: TraceConfig::default(),
            harness: HarnessConfig::default(),
            gateway: GatewayConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML document, apply the given `(name, value)` environment
    /// pairs, and validate. Relative paths in the document are resolved
    /// against `base_dir`.
    pub fn from_toml_with_env(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
        base_dir: Option<&Path>,
    ) -> Result<RunConfig> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let from_file = doc.clone();
        apply_env(&mut doc, env)?;
        let mut config: RunConfig =
            doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if let Some(base) = base_dir {
            // Only paths written in the file are relative to it; overrides
            // from the environment are relative to the working directory.
            let in_file = |key: &[&str]| contains(&from_file, key);
            let fix = |p: Option<&mut PathBuf>| {
                if let Some(p) = p.filter(|p| p.is_relative()) {
                    *p = base.join(&*p);
                }
            };
            if in_file(&["output_dir"]) {
                fix(Some(&mut config.output_dir));
            }
            if in_file(&["cache_dir"]) {
                fix(config.cache_dir.as_mut());
            }
            if in_file(&["prompts_dir"]) {
                fix(config.prompts_dir.as_mut());
            }
            if in_file(&["gateway", "replay_file"]) {
                fix(config.gateway.replay_file.as_mut());
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Load `path` (or defaults when `None`) with overrides from the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
        match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                RunConfig::from_toml_with_env(&text, env, p.parent())
            }
            None => RunConfig::from_toml_with_env("", env, None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        let positive = [
            ("workers", self.workers as f64),
            ("thresholds.unique_listing_threshold", t.unique_listing_threshold as f64),
            ("thresholds.max_repair_attempts", t.max_repair_attempts as f64),
            ("thresholds.max_runtime_retries", t.max_runtime_retries as f64),
            ("thresholds.timeout_s", t.timeout_s),
            ("thresholds.max_rows", t.max_rows as f64),
            ("thresholds.max_cell_chars", t.max_cell_chars as f64),
            ("thresholds.top_k", t.top_k as f64),
            ("thresholds.max_steps", t.max_steps as f64),
            ("harness.startup_timeout_s", self.harness.startup_timeout_s),
            ("harness.op_timeout_s", self.harness.op_timeout_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.harness.command.is_empty() {
            return Err(Error::Config("harness.command must name a program".into()));
        }
        Ok(())
    }

    pub fn stats_options(&self) -> StatsOptions {
        StatsOptions { top_k: self.thresholds.top_k, listing_threshold: self.thresholds.unique_listing_threshold }
    }
}

fn contains(table: &toml::Table, key: &[&str]) -> bool {
    let Some((first, rest)) = key.split_first() else { return false };
    match (table.get(*first), rest.is_empty()) {
        (Some(_), true) => true,
        (Some(toml::Value::Table(t)), false) => contains(t, rest),
        _ => false,
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_env(doc: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut pairs: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != API_KEY_ENV && !k.starts_with("MRT_LIVE_"))
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_lowercase()).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("malformed override variable {key}")));
        }
        let mut table = &mut *doc;
        for segment in &path[..path.len() - 1] {
            let entry = table
                .entry(segment.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = match entry {
                toml::Value::Table(t) => t,
                _ => return Err(Error::Config(format!("{key}: `{segment}` is not a section"))),
            };
        }
        table.insert(path[path.len() - 1].clone(), parse_env_value(&raw));
    }
    Ok(())
}
