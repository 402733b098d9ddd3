//! Client side of the execution harness protocol.
//!
//! The harness is a subprocess speaking JSON lines over its standard
//! streams. It announces itself with `{"hello": 1}`, then answers each
//! request with exactly one reply carrying the request's id. Timeouts are
//! enforced here: a request that outlives its budget gets the process killed
//! and an `ok=false` reply with error type `Timeout`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use mrt_core::RawValue;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

pub const PROTOCOL_VERSION: u64 = 1;
pub const TIMEOUT_ERROR: &str = "Timeout";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot start harness `{command}`: {message}")]
    Spawn { command: String, message: String },
    #[error("harness process died without replying{}", stderr_suffix(.stderr))]
    Crashed { stderr: String },
    #[error("harness protocol violation: {0}")]
    Protocol(String),
}

fn stderr_suffix(stderr: &str) -> String {
    if stderr.trim().is_empty() {
        String::new()
    } else {
        format!(" (stderr: {})", stderr.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Check,
    Run,
    Convert,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessRequest {
    pub id: u64,
    pub op: Op,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    /// Destination of a `convert`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_path: Option<String>,
}

/// Outcome of one harness request. `value` distinguishes an absent value
/// (`None`) from a JSON `null` (`Some(RawValue::Null)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub ok: bool,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub value: Option<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<RawValue>, D::Error> {
    RawValue::deserialize(d).map(Some)
}

impl ExecutionOutcome {
    pub fn failure(error_type: &str, message: impl Into<String>) -> ExecutionOutcome {
        ExecutionOutcome {
            ok: false,
            value: None,
            value_kind: None,
            error_type: Some(error_type.to_string()),
            error_message: Some(message.into()),
            traceback: None,
            wall_ms: None,
        }
    }

    /// `error_type: error_message`, or a placeholder when the reply had none.
    pub fn error_text(&self) -> String {
        match (&self.error_type, &self.error_message) {
            (Some(t), Some(m)) if !m.is_empty() => format!("{t}: {m}"),
            (Some(t), _) => t.clone(),
            (None, Some(m)) => m.clone(),
            (None, None) => "unknown error".to_string(),
        }
    }

    pub fn is_timeout(&self) -> bool {
        self.error_type.as_deref() == Some(TIMEOUT_ERROR)
    }
}

#[derive(Debug, Deserialize)]
struct WireReply {
    id: u64,
    #[serde(flatten)]
    outcome: ExecutionOutcome,
}

pub trait Harness: Send {
    /// Syntax and contract check of `code`.
    fn check(&mut self, code: &str) -> Result<ExecutionOutcome, HarnessError>;
    /// Run `code` against the table at `table_path`.
    fn run(&mut self, code: &str, table_path: &Path, timeout_s: f64) -> Result<ExecutionOutcome, HarnessError>;
    /// Convert a table file into CSV at `output`.
    fn convert(&mut self, input: &Path, output: &Path) -> Result<ExecutionOutcome, HarnessError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessSettings {
    /// Program and arguments.
    pub command: Vec<String>,
    pub startup_timeout_s: f64,
    /// Budget for `check` and `convert`, which carry no timeout of their own.
    pub op_timeout_s: f64,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        HarnessSettings { command: vec!["mrt-harness".to_string()], startup_timeout_s: 60.0, op_timeout_s: 60.0 }
    }
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
    // Dropped (and removed) with the process.
    _workdir: TempDir,
}

/// A harness subprocess, started lazily and restarted after it dies.
pub struct ProcessHarness {
    settings: HarnessSettings,
    running: Option<Running>,
    next_id: u64,
    restarts: u32,
}

const STDERR_TAIL: usize = 4096;

impl ProcessHarness {
    pub fn new(settings: HarnessSettings) -> ProcessHarness {
        ProcessHarness { settings, running: None, next_id: 1, restarts: 0 }
    }

    /// Processes started after the first one.
    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn command_line(&self) -> String {
        self.settings.command.join(" ")
    }

    fn spawn(&mut self) -> Result<(), HarnessError> {
        let spawn_err = |message: String| HarnessError::Spawn { command: self.command_line(), message };
        let (program, args) = self.settings.command.split_first().ok_or_else(|| spawn_err("empty command".into()))?;
        let workdir = tempfile::Builder::new().prefix("mrt-harness-").tempdir().map_err(|e| spawn_err(e.to_string()))?;
        let mut child = Command::new(program)
            .args(args)
            .current_dir(workdir.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| spawn_err(e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_TAIL {
                    let mut cut = s.len() - STDERR_TAIL;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });

        let mut running = Running { child, stdin, lines: rx, stderr, _workdir: workdir };
        let deadline = Instant::now() + secs(self.settings.startup_timeout_s);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match running.lines.recv_timeout(left) {
                Ok(line) => {
                    let Ok(v) = serde_json::from_str::<serde_json::Value>(&line) else {
                        log::warn!("ignoring non-protocol harness output: {line}");
                        continue;
                    };
                    if v.get("hello").and_then(|h| h.as_u64()) == Some(PROTOCOL_VERSION) {
                        break;
                    }
                    kill(&mut running);
                    return Err(HarnessError::Protocol(format!("unexpected banner {line}")));
                }
                Err(RecvTimeoutError::Timeout) => {
                    kill(&mut running);
                    return Err(spawn_err("no banner before the startup timeout".into()));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let stderr = reap(&mut running);
                    return Err(spawn_err(format!("exited before the banner{}", stderr_suffix(&stderr))));
                }
            }
        }
        if self.next_id > 1 {
            self.restarts += 1;
        }
        self.running = Some(running);
        Ok(())
    }

    fn request(&mut self, mut req: HarnessRequest, timeout_s: f64) -> Result<ExecutionOutcome, HarnessError> {
        if self.running.is_none() {
            self.spawn()?;
        }
        req.id = self.next_id;
        self.next_id += 1;
        let line = serde_json::to_string(&req).map_err(|e| HarnessError::Protocol(e.to_string()))?;
        let started = Instant::now();
        let running = self.running.as_mut().expect("spawned above");
        if writeln!(running.stdin, "{line}").and_then(|_| running.stdin.flush()).is_err() {
            let stderr = reap(running);
            self.running = None;
            return Err(HarnessError::Crashed { stderr });
        }
        let deadline = started + secs(timeout_s);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match running.lines.recv_timeout(left) {
                Ok(line) => {
                    let reply: WireReply = match serde_json::from_str(&line) {
                        Ok(r) => r,
                        Err(_) => {
                            log::warn!("ignoring non-protocol harness output: {line}");
                            continue;
                        }
                    };
                    if reply.id != req.id {
                        log::warn!("ignoring harness reply for stale request {}", reply.id);
                        continue;
                    }
                    let mut outcome = reply.outcome;
                    outcome.wall_ms = Some(started.elapsed().as_millis() as u64);
                    return Ok(outcome);
                }
                Err(RecvTimeoutError::Timeout) => {
                    kill(running);
                    self.running = None;
                    let mut outcome = ExecutionOutcome::failure(
                        TIMEOUT_ERROR,
                        format!("execution exceeded {timeout_s} s and the harness was stopped"),
                    );
                    outcome.wall_ms = Some(started.elapsed().as_millis() as u64);
                    return Ok(outcome);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let stderr = reap(running);
                    self.running = None;
                    return Err(HarnessError::Crashed { stderr });
                }
            }
        }
    }
}

impl Harness for ProcessHarness {
    fn check(&mut self, code: &str) -> Result<ExecutionOutcome, HarnessError> {
        let req = HarnessRequest {
            id: 0,
            op: Op::Check,
            code: Some(code.to_string()),
            table_path: None,
            timeout_s: None,
            out_path: None,
        };
        self.request(req, self.settings.op_timeout_s)
    }

    fn run(&mut self, code: &str, table_path: &Path, timeout_s: f64) -> Result<ExecutionOutcome, HarnessError> {
        let req = HarnessRequest {
            id: 0,
            op: Op::Run,
            code: Some(code.to_string()),
            table_path: Some(absolute(table_path)),
            timeout_s: Some(timeout_s),
            out_path: None,
        };
        self.request(req, timeout_s)
    }

    fn convert(&mut self, input: &Path, output: &Path) -> Result<ExecutionOutcome, HarnessError> {
        let req = HarnessRequest {
            id: 0,
            op: Op::Convert,
            code: None,
            table_path: Some(absolute(input)),
            timeout_s: None,
            out_path: Some(absolute(output)),
        };
        self.request(req, self.settings.op_timeout_s)
    }
}

impl Drop for ProcessHarness {
    fn drop(&mut self) {
        if let Some(r) = self.running.as_mut() {
            kill(r);
        }
    }
}

// The harness runs in its own working directory, so relative paths must be
// resolved against ours first.
fn absolute(p: &Path) -> String {
    let abs: PathBuf = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    abs.to_string_lossy().into_owned()
}

fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(if s.is_finite() && s > 0.0 { s } else { 0.0 })
}

fn kill(r: &mut Running) {
    let _ = r.child.kill();
    let _ = r.child.wait();
}

fn reap(r: &mut Running) -> String {
    kill(r);
    // Give the stderr reader a moment to drain.
    thread::sleep(Duration::from_millis(20));
    r.stderr.lock().unwrap().clone()
}
