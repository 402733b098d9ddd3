#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mrt::config::{Mode, RunConfig};
use mrt::gateway::{Gateway, GatewayConfig, Replay};
use mrt::harness::{HarnessSettings, ProcessHarness};
use mrt::pipeline::Pipeline;
use mrt::prompts::PromptSet;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn stub_harness() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("support").join("stub_harness.py")
}

pub fn harness_command() -> Vec<String> {
    vec!["python3".to_string(), stub_harness().to_string_lossy().into_owned()]
}

pub fn harness_settings() -> HarnessSettings {
    HarnessSettings { command: harness_command(), ..HarnessSettings::default() }
}

/// Scripted gateway over the fixture replies, the stub harness, no disk cache.
pub fn scripted_config(mode: Mode, workers: usize) -> RunConfig {
    let mut c = RunConfig::from_toml_with_env("", Vec::new(), None).unwrap();
    c.mode = mode;
    c.workers = workers;
    c.cache_dir = None;
    c.harness.command = harness_command();
    c.gateway = GatewayConfig { replay_file: Some(fixture("replay.json")), ..GatewayConfig::scripted() };
    c
}

pub fn pipeline(config: RunConfig) -> Pipeline {
    let settings = config.harness.settings();
    let gateway = Gateway::new(config.gateway.clone()).unwrap();
    Pipeline::new(config, gateway, PromptSet::builtin(), || Box::new(ProcessHarness::new(settings.clone())))
}

pub fn pipeline_with_replay(config: RunConfig, replay: Replay) -> Pipeline {
    let settings = config.harness.settings();
    let gateway = Gateway::with_replay(config.gateway.clone(), replay);
    Pipeline::new(config, gateway, PromptSet::builtin(), || Box::new(ProcessHarness::new(settings.clone())))
}
