//! Chat-completion access shared by every LLM stage.
//!
//! Two backends sit behind one [`Gateway`]: an OpenAI-compatible HTTP client
//! and a scripted replay store for tests. Every call, successful or not, is
//! appended to the gateway's interaction log.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use mrt_core::StageName;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::table_io::sha256_hex;

pub const API_KEY_ENV: &str = "MRT_LLM_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("LLM unavailable for stage {stage} after {attempts} attempt(s): {message}")]
    LlmUnavailable { stage: StageName, attempts: u32, message: String },
    #[error("LLM request for stage {stage} timed out after {attempts} attempt(s)")]
    Timeout { stage: StageName, attempts: u32 },
    #[error("no scripted reply left for stage {stage} (tag `{tag}`)")]
    ReplayExhausted { stage: StageName, tag: String },
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("replay file {}: {message}", path.display())]
    ReplayFile { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Message {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Message {
        Message { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub stage: StageName,
    pub messages: Vec<Message>,
    /// Question id, or `table:<name>` for descriptor calls. Keys scripted
    /// replies and call ids.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(stage: StageName, tag: &str, system: &str, user: String) -> ChatRequest {
        ChatRequest {
            stage,
            messages: vec![Message::system(system), Message::user(user)],
            tag: tag.to_string(),
        }
    }

    fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub call_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
}

/// Resolved settings for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageBinding {
    pub backend: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    /// Transport retries after the first attempt.
    pub retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
    /// Falls back to the stage default when absent.
    pub max_tokens: Option<u32>,
}

impl Default for StageBinding {
    fn default() -> Self {
        StageBinding {
            backend: BackendKind::Http,
            endpoint: "http://127.0.0.1:8000/v1".to_string(),
            model: "default".to_string(),
            temperature: 0.0,
            timeout_s: 120.0,
            retries: 2,
            backoff_ms: 500,
            max_tokens: None,
        }
    }
}

/// Per-stage override; absent fields inherit from the default binding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingOverride {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub timeout_s: Option<f64>,
    pub retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub default: StageBinding,
    pub stages: BTreeMap<StageName, BindingOverride>,
    /// Replay file for the scripted backend.
    pub replay_file: Option<PathBuf>,
}

impl GatewayConfig {
    /// A configuration that routes every stage to the scripted backend.
    pub fn scripted() -> GatewayConfig {
        let mut c = GatewayConfig::default();
        c.default.backend = BackendKind::Scripted;
        c.default.model = "scripted".to_string();
        c
    }

    pub fn binding(&self, stage: StageName) -> StageBinding {
        let mut b = self.default.clone();
        if let Some(o) = self.stages.get(&stage) {
            if let Some(v) = o.backend {
                b.backend = v;
            }
            if let Some(v) = &o.endpoint {
                b.endpoint = v.clone();
            }
            if let Some(v) = &o.model {
                b.model = v.clone();
            }
            if let Some(v) = o.temperature {
                b.temperature = v;
            }
            if let Some(v) = o.timeout_s {
                b.timeout_s = v;
            }
            if let Some(v) = o.retries {
                b.retries = v;
            }
            if let Some(v) = o.backoff_ms {
                b.backoff_ms = v;
            }
            if o.max_tokens.is_some() {
                b.max_tokens = o.max_tokens;
            }
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub stage: StageName,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// SHA-256 of the rendered user prompt. Digest-keyed entries are not
    /// consumed and answer every matching call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
}

/// Scripted replies. Lookup order: prompt digest, then the queue for
/// (stage, tag), then the queue for the stage alone.
#[derive(Debug, Default)]
pub struct Replay {
    by_digest: HashMap<(StageName, String), String>,
    queues: Mutex<ReplayQueues>,
}

#[derive(Debug, Default)]
struct ReplayQueues {
    tagged: HashMap<(StageName, String), VecDeque<String>>,
    untagged: HashMap<StageName, VecDeque<String>>,
}

impl Replay {
    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>) -> Replay {
        let mut replay = Replay::default();
        let queues = replay.queues.get_mut().unwrap();
        for e in entries {
            if let Some(digest) = e.prompt_sha256 {
                replay.by_digest.insert((e.stage, digest.to_lowercase()), e.content);
            } else if let Some(tag) = e.tag {
                queues.tagged.entry((e.stage, tag)).or_default().push_back(e.content);
            } else {
                queues.untagged.entry(e.stage).or_default().push_back(e.content);
            }
        }
        replay
    }

    pub fn load(path: &Path) -> Result<Replay, GatewayError> {
        let bad = |message: String| GatewayError::ReplayFile { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let entries: Vec<ReplayEntry> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        Ok(Replay::from_entries(entries))
    }

    fn next(&self, stage: StageName, tag: &str, prompt: &str) -> Option<String> {
        if !self.by_digest.is_empty() {
            if let Some(hit) = self.by_digest.get(&(stage, sha256_hex(prompt.as_bytes()))) {
                return Some(hit.clone());
            }
        }
        let mut q = self.queues.lock().unwrap();
        if let Some(hit) = q.tagged.get_mut(&(stage, tag.to_string())).and_then(|v| v.pop_front()) {
            return Some(hit);
        }
        q.untagged.get_mut(&stage).and_then(|v| v.pop_front())
    }

    /// Replies not yet consumed, per stage.
    pub fn remaining(&self) -> BTreeMap<StageName, usize> {
        let q = self.queues.lock().unwrap();
        let mut out = BTreeMap::new();
        for ((stage, _), v) in &q.tagged {
            *out.entry(*stage).or_default() += v.len();
        }
        for (stage, v) in &q.untagged {
            *out.entry(*stage).or_default() += v.len();
        }
        out.retain(|_, n| *n > 0);
        out
    }
}

/// One logged gateway call.
#[derive(Debug, Clone, Serialize)]
pub struct Interaction {
    pub seq: u64,
    pub call_id: String,
    pub stage: StageName,
    pub tag: String,
    pub backend_id: String,
    pub model: String,
    pub prompt_sha256: String,
    pub messages: Vec<Message>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

#[derive(Debug, Default)]
struct LogState {
    entries: Vec<Interaction>,
    per_tag: HashMap<String, u64>,
}

pub struct Gateway {
    config: GatewayConfig,
    replay: Option<Replay>,
    api_key: Option<String>,
    log: Mutex<LogState>,
}

impl Gateway {
    /// Build from configuration, loading the replay file if one is named.
    pub fn new(config: GatewayConfig) -> Result<Gateway, GatewayError> {
        let replay = match &config.replay_file {
            Some(p) => Some(Replay::load(p)?),
            None => None,
        };
        Ok(Gateway::build(config, replay))
    }

    pub fn with_replay(config: GatewayConfig, replay: Replay) -> Gateway {
        Gateway::build(config, Some(replay))
    }

    fn build(config: GatewayConfig, replay: Option<Replay>) -> Gateway {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Gateway { config, replay, api_key, log: Mutex::new(LogState::default()) }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn replay(&self) -> Option<&Replay> {
        self.replay.as_ref()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatReply, GatewayError> {
        match request.messages.first() {
            None => return Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(GatewayError::InvalidRequest("first message must be the system prompt".into()))
            }
            _ => {}
        }
        let binding = self.config.binding(request.stage);
        let call_id = {
            let mut log = self.log.lock().unwrap();
            let n = log.per_tag.entry(request.tag.clone()).or_insert(0);
            *n += 1;
            format!("{}/{}/{}", request.tag, n, request.stage)
        };
        let prompt = request.last_user();
        let started = Instant::now();
        let (backend_id, result) = match binding.backend {
            BackendKind::Scripted => ("scripted".to_string(), self.scripted(request, prompt)),
            BackendKind::Http => (format!("http:{}", binding.model), self.http(request, &binding)),
        };
        let latency_ms = started.elapsed().as_millis() as u64;

        let mut log = self.log.lock().unwrap();
        let seq = log.entries.len() as u64;
        log.entries.push(Interaction {
            seq,
            call_id: call_id.clone(),
            stage: request.stage,
            tag: request.tag.clone(),
            backend_id: backend_id.clone(),
            model: binding.model.clone(),
            prompt_sha256: sha256_hex(prompt.as_bytes()),
            messages: request.messages.clone(),
            reply: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
            latency_ms,
        });
        drop(log);
        result.map(|content| ChatReply { content, backend_id, latency_ms, call_id })
    }

    fn scripted(&self, request: &ChatRequest, prompt: &str) -> Result<String, GatewayError> {
        self.replay
            .as_ref()
            .and_then(|r| r.next(request.stage, &request.tag, prompt))
            .ok_or_else(|| GatewayError::ReplayExhausted {
                stage: request.stage,
                tag: request.tag.clone(),
            })
    }

    fn http(&self, request: &ChatRequest, binding: &StageBinding) -> Result<String, GatewayError> {
        let stage = request.stage;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(binding.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build();
        let agent = ureq::Agent::new_with_config(config);
        let url = format!("{}/chat/completions", binding.endpoint.trim_end_matches('/'));
        let body = json!({
            "model": binding.model,
            "messages": request.messages,
            "temperature": binding.temperature,
            "max_tokens": binding.max_tokens.unwrap_or(stage.default_max_tokens()),
        });

        let attempts = binding.retries + 1;
        let mut last_error = String::new();
        let mut timed_out = false;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = binding.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            let mut req = agent.post(&url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let value: serde_json::Value = resp.body_mut().read_json().map_err(|e| {
                            GatewayError::LlmUnavailable { stage, attempts: attempt + 1, message: e.to_string() }
                        })?;
                        return value["choices"][0]["message"]["content"]
                            .as_str()
                            .map(str::to_string)
                            .ok_or_else(|| GatewayError::LlmUnavailable {
                                stage,
                                attempts: attempt + 1,
                                message: "reply has no choices[0].message.content".into(),
                            });
                    }
                    timed_out = false;
                    last_error = format!("HTTP status {status}");
                    if status != 429 && status < 500 {
                        return Err(GatewayError::LlmUnavailable { stage, attempts: attempt + 1, message: last_error });
                    }
                }
                Err(ureq::Error::Timeout(t)) => {
                    timed_out = true;
                    last_error = format!("timeout: {t}");
                }
                Err(e) => {
                    timed_out = false;
                    last_error = e.to_string();
                }
            }
            log::warn!("{stage} call to {url} failed (attempt {}/{attempts}): {last_error}", attempt + 1);
        }
        if timed_out {
            Err(GatewayError::Timeout { stage, attempts })
        } else {
            Err(GatewayError::LlmUnavailable { stage, attempts, message: last_error })
        }
    }

    /// Snapshot of the interaction log.
    pub fn interactions(&self) -> Vec<Interaction> {
        self.log.lock().unwrap().entries.clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().entries.len()
    }

    /// Call ids logged under `tag`, in call order.
    pub fn call_ids(&self, tag: &str) -> Vec<String> {
        let log = self.log.lock().unwrap();
        let mut calls: Vec<&Interaction> = log.entries.iter().filter(|i| i.tag == tag).collect();
        calls.sort_by_key(|i| call_number(&i.call_id));
        calls.into_iter().map(|i| i.call_id.clone()).collect()
    }
}

fn call_number(call_id: &str) -> u64 {
    call_id.rsplit('/').nth(1).and_then(|n| n.parse().ok()).unwrap_or(0)
}
