//! Chat-completion transport: an OpenAI-compatible HTTP client, a scripted
//! mock, transcripts and the token ledger.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// The agent issuing a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Init,
    Policy,
    WorldModel,
    PolicyCritic,
    WmCritic,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Init, Role::Policy, Role::WorldModel, Role::PolicyCritic, Role::WmCritic];

    pub fn name(self) -> &'static str {
        match self {
            Role::Init => "init",
            Role::Policy => "policy",
            Role::WorldModel => "world_model",
            Role::PolicyCritic => "policy_critic",
            Role::WmCritic => "wm_critic",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| LlmError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("mock script has no reply for {role} call {index}")]
    ScriptExhausted { role: Role, index: usize },
    #[error("mock script: {0}")]
    Script(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// One single-turn chat call: a system and a user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: Role,
    /// Per-role call counter, assigned before dispatch.
    pub index: usize,
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<String>,
}

impl ChatRequest {
    /// OpenAI chat-completions body. Knobs are attached only when `knobs` is set.
    pub fn wire_body(&self, knobs: bool) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
            "temperature": self.temperature,
        });
        if knobs {
            if let Some(effort) = &self.reasoning_effort {
                body["reasoning_effort"] = json!(effort);
            }
            if let Some(verbosity) = &self.verbosity {
                body["verbosity"] = json!(verbosity);
            }
        }
        body
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResult {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(skip)]
    pub latency: Duration,
    pub backend: String,
}

/// Extracts the reply text and usage counts from a chat-completions response.
pub fn parse_wire_response(body: &Value) -> Result<(String, Option<(u64, u64)>), LlmError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Response("missing choices[0].message.content".into()))?;
    let usage = match (
        body.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        body.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    ) {
        (Some(i), Some(o)) => Some((i, o)),
        _ => None,
    };
    Ok((text.to_string(), usage))
}

/// Synthetic token count: one token per four characters, rounded up.
pub fn synthetic_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// Whether reasoning-effort and verbosity knobs are forwarded.
    fn supports_knobs(&self) -> bool {
        false
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResult, LlmError>;
}

/// Canned replies keyed by (role, call index).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockScript {
    replies: HashMap<(Role, usize), String>,
}

#[derive(Deserialize)]
struct ScriptFile {
    #[serde(default)]
    reply: Vec<ScriptEntry>,
}

#[derive(Deserialize)]
struct ScriptEntry {
    role: Role,
    index: usize,
    text: String,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, role: Role, index: usize, text: impl Into<String>) -> &mut Self {
        self.replies.insert((role, index), text.into());
        self
    }

    /// Appends `text` as the next index for `role`.
    pub fn push(&mut self, role: Role, text: impl Into<String>) -> &mut Self {
        let index = self.count(role);
        self.insert(role, index, text)
    }

    pub fn count(&self, role: Role) -> usize {
        self.replies.keys().filter(|(r, _)| *r == role).count()
    }

    pub fn get(&self, role: Role, index: usize) -> Option<&str> {
        self.replies.get(&(role, index)).map(String::as_str)
    }

    /// TOML form: `[[reply]]` tables with `role`, `index` and `text`.
    pub fn from_toml(text: &str) -> Result<Self, LlmError> {
        let file: ScriptFile = toml::from_str(text).map_err(|e| LlmError::Script(e.to_string()))?;
        let mut script = Self::new();
        for entry in file.reply {
            if script.replies.insert((entry.role, entry.index), entry.text).is_some() {
                return Err(LlmError::Script(format!("duplicate entry for {} call {}", entry.role, entry.index)));
            }
        }
        Ok(script)
    }

    pub fn to_toml(&self) -> String {
        let mut keys: Vec<_> = self.replies.keys().copied().collect();
        keys.sort();
        let entries: Vec<Value> = keys
            .into_iter()
            .map(|(role, index)| json!({"role": role, "index": index, "text": self.replies[&(role, index)]}))
            .collect();
        toml::to_string(&json!({ "reply": entries })).expect("scripts always serialize")
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Deterministic backend replaying a [`MockScript`].
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResult, LlmError> {
        let text = self
            .script
            .get(request.role, request.index)
            .ok_or(LlmError::ScriptExhausted { role: request.role, index: request.index })?
            .to_string();
        Ok(ChatResult {
            input_tokens: synthetic_tokens(&request.system) + synthetic_tokens(&request.user),
            output_tokens: synthetic_tokens(&text),
            text,
            latency: Duration::ZERO,
            backend: self.id().to_string(),
        })
    }
}

pub const ENDPOINT_VAR: &str = "PATHWISE_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "PATHWISE_LLM_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Retry and timeout settings of the HTTP client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_seconds: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_backoff_ms: 1000, max_backoff_ms: 30_000, timeout_seconds: 300 }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

/// Blocking client for an OpenAI-compatible chat-completions endpoint.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    knobs: bool,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, knobs: bool, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(retry.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint: endpoint.into(), api_key, knobs, retry, agent }
    }

    /// Endpoint from `PATHWISE_LLM_ENDPOINT` (else `OPENAI_BASE_URL` + `/chat/completions`,
    /// else the public default) and key from `PATHWISE_LLM_API_KEY` or `OPENAI_API_KEY`.
    pub fn from_env(knobs: bool, retry: RetryPolicy) -> Self {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .or_else(|| {
                std::env::var("OPENAI_BASE_URL").ok().map(|b| format!("{}/chat/completions", b.trim_end_matches('/')))
            })
            .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
        let api_key = std::env::var(API_KEY_VAR).ok().or_else(|| std::env::var("OPENAI_API_KEY").ok());
        Self::new(endpoint, api_key, knobs, retry)
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = req.send_json(body).map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| Attempt::Transient(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| Attempt::Fatal(LlmError::Response(e.to_string()))),
            401 | 403 => Err(Attempt::Fatal(LlmError::Auth(status))),
            408 | 429 | 500..=599 => Err(Attempt::Transient(format!("HTTP {status}: {text}"))),
            _ => Err(Attempt::Fatal(LlmError::Http { status, body: text })),
        }
    }
}

enum Attempt {
    Transient(String),
    Fatal(LlmError),
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        "http"
    }

    fn supports_knobs(&self) -> bool {
        self.knobs
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResult, LlmError> {
        let body = request.wire_body(self.knobs);
        let start = Instant::now();
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(value) => {
                    let (text, usage) = parse_wire_response(&value)?;
                    let (input_tokens, output_tokens) = usage.unwrap_or_else(|| {
                        (synthetic_tokens(&request.system) + synthetic_tokens(&request.user), synthetic_tokens(&text))
                    });
                    return Ok(ChatResult {
                        text,
                        input_tokens,
                        output_tokens,
                        latency: start.elapsed(),
                        backend: self.id().to_string(),
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => {
                    log::warn!("{} call {} attempt {} failed: {msg}", request.role, request.index, attempt + 1);
                    last = msg;
                }
            }
        }
        Err(LlmError::RetriesExhausted { attempts, last })
    }
}

/// One logged call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: usize,
    pub step: usize,
    pub request: ChatRequest,
    pub reply: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub backend: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCount {
    pub input: u64,
    pub output: u64,
}

impl TokenCount {
    pub fn add(&mut self, input: u64, output: u64) {
        self.input += input;
        self.output += output;
    }
}

/// Per-role and total token counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub per_role: BTreeMap<Role, TokenCount>,
    pub total: TokenCount,
}

impl TokenLedger {
    pub fn record(&mut self, role: Role, input: u64, output: u64) {
        self.per_role.entry(role).or_default().add(input, output);
        self.total.add(input, output);
    }

    pub fn from_transcript(entries: &[TranscriptEntry]) -> Self {
        let mut ledger = Self::default();
        for e in entries {
            ledger.record(e.request.role, e.input_tokens, e.output_tokens);
        }
        ledger
    }
}

/// Append-only call log with its token ledger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    ledger: TokenLedger,
}

impl Transcript {
    pub fn push(&mut self, entry: TranscriptEntry) {
        self.ledger.record(entry.request.role, entry.input_tokens, entry.output_tokens);
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    /// JSON lines, one entry each.
    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entries always serialize") + "\n").collect()
    }
}
