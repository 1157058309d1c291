//! Completion backends: recorded transcripts and OpenAI-compatible chat endpoints.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::PromptDoc;

pub const DEFAULT_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 100_000;
pub const CONTEXT_WINDOW_TOKENS: u32 = 128_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    Replay { transcript: PathBuf },
    HttpChat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub context_window: u32,
    pub timeout: Duration,
    pub retries: u32,
    pub max_in_flight: usize,
    /// Append every live completion to this transcript so the run can be replayed.
    pub record_to: Option<PathBuf>,
}

impl BackendConfig {
    pub fn replay(transcript: impl Into<PathBuf>) -> Self {
        BackendConfig { kind: BackendKind::Replay { transcript: transcript.into() }, ..Self::http("", "") }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            context_window: CONTEXT_WINDOW_TOKENS,
            timeout: Duration::from_secs(600),
            retries: 3,
            max_in_flight: 4,
            record_to: None,
        }
    }

    /// HTTP config from `DEOB_LLM_ENDPOINT`, `DEOB_LLM_MODEL` and `DEOB_LLM_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let endpoint = var("DEOB_LLM_ENDPOINT").ok_or_else(|| LlmError::InvalidConfig("DEOB_LLM_ENDPOINT is not set".into()))?;
        let model = var("DEOB_LLM_MODEL").ok_or_else(|| LlmError::InvalidConfig("DEOB_LLM_MODEL is not set".into()))?;
        Ok(BackendConfig { api_key: var("DEOB_LLM_KEY"), ..Self::http(endpoint, model) })
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidConfig(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_in_flight == 0 {
            return Err(LlmError::InvalidConfig("max_in_flight must be positive".into()));
        }
        if self.kind == BackendKind::HttpChat && self.endpoint.is_empty() {
            return Err(LlmError::InvalidConfig("http-chat needs an endpoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no recorded response for prompt {0}")]
    ReplayMiss(String),
    #[error("endpoint answered HTTP {0}")]
    HttpError(u16),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_hash: String,
    pub response_text: String,
}

/// Line-delimited JSON records keyed by prompt hash. Later records win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: HashMap<String, String>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let err = |message: String| LlmError::Transcript { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: TranscriptRecord = serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            entries.insert(r.prompt_hash, r.response_text);
        }
        Ok(Transcript { entries })
    }

    pub fn get(&self, hash: &str) -> Option<&str> {
        self.entries.get(hash).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append one record to a transcript file, creating it if needed.
    pub fn append(path: &Path, record: &TranscriptRecord) -> Result<(), LlmError> {
        let err = |e: std::io::Error| LlmError::Transcript { path: path.to_path_buf(), message: e.to_string() };
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        writeln!(f, "{}", serde_json::to_string(record).expect("plain strings")).map_err(err)
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// A configured backend, shareable across threads.
pub struct LlmClient {
    config: BackendConfig,
    transcript: Option<Transcript>,
    http: Option<reqwest::blocking::Client>,
    slots: Slots,
    record_lock: Mutex<()>,
}

impl LlmClient {
    pub fn new(config: BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let (transcript, http) = match &config.kind {
            BackendKind::Replay { transcript } => (Some(Transcript::load(transcript)?), None),
            BackendKind::HttpChat => {
                let client = reqwest::blocking::Client::builder()
                    .timeout(config.timeout)
                    .build()
                    .map_err(|e| LlmError::InvalidConfig(e.to_string()))?;
                (None, Some(client))
            }
        };
        let slots = Slots { free: Mutex::new(config.max_in_flight), cv: Condvar::new() };
        Ok(LlmClient { config, transcript, http, slots, record_lock: Mutex::new(()) })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn complete(&self, prompt: &PromptDoc) -> Result<Completion, LlmError> {
        if let Some(t) = &self.transcript {
            let hash = prompt.hash();
            return t.get(&hash).map(|text| Completion { text: text.to_string(), usage: None }).ok_or(LlmError::ReplayMiss(hash));
        }
        let _slot = self.slots.acquire();
        let mut attempt = 0;
        let done = loop {
            match self.post(prompt) {
                Err(e) if attempt < self.config.retries && transient(&e) => {
                    attempt += 1;
                    log::warn!("chat request failed ({e}), retry {attempt}/{}", self.config.retries);
                    thread::sleep(Duration::from_millis(200 << attempt.min(6)));
                }
                r => break r?,
            }
        };
        if let Some(path) = &self.config.record_to {
            let _guard = self.record_lock.lock().unwrap_or_else(|e| e.into_inner());
            Transcript::append(path, &TranscriptRecord { prompt_hash: prompt.hash(), response_text: done.text.clone() })?;
        }
        Ok(done)
    }

    fn post(&self, prompt: &PromptDoc) -> Result<Completion, LlmError> {
        let client = self.http.as_ref().expect("http backend");
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user_message()},
            ],
        });
        let mut req = client.post(url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::HttpError(status.as_u16()));
        }
        let v: serde_json::Value = resp.json().map_err(|e| LlmError::MalformedBody(e.to_string()))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::MalformedBody("missing choices[0].message.content".into()))?;
        let usage = serde_json::from_value::<Usage>(v["usage"].clone()).ok();
        Ok(Completion { text: text.to_string(), usage })
    }
}

fn transient(e: &LlmError) -> bool {
    match e {
        LlmError::Timeout | LlmError::Transport(_) => true,
        LlmError::HttpError(s) => *s == 429 || *s >= 500,
        _ => false,
    }
}
