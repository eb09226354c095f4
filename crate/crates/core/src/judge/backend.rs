//! Judge backends: a remote chat-completions endpoint and a scripted fixture.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeTask {
    Pedagogy,
    Engagement,
}

impl JudgeTask {
    pub fn name(self) -> &'static str {
        match self {
            JudgeTask::Pedagogy => "pedagogy",
            JudgeTask::Engagement => "engagement",
        }
    }
}

/// Everything about a backend that can change its replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendIdentity {
    pub backend: String,
    pub model: String,
    pub temperature: f64,
}

impl BackendIdentity {
    pub fn cache_key_part(&self) -> String {
        format!("{}|{}|{}", self.backend, self.model, self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub task: JudgeTask,
    /// Feedback id the request is about; remote backends ignore it.
    pub item_id: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

pub trait JudgeBackend: Send + Sync {
    fn identity(&self) -> BackendIdentity;

    /// Returns the raw text of the assistant reply.
    fn complete(&self, request: &JudgeRequest) -> Result<String, BackendError>;
}

/// One scripted reply in a fixture transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedReply {
    Text(String),
    TransportError(String),
}

/// A line of a fixture transcript: the replies to give, in order, for one item.
/// Once exhausted the last reply repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub task: JudgeTask,
    pub feedback_id: String,
    pub replies: Vec<ScriptedReply>,
}

/// Deterministic backend replaying a transcript keyed by (task, feedback id).
#[derive(Debug)]
pub struct FixtureBackend {
    script: HashMap<(JudgeTask, String), Vec<ScriptedReply>>,
    served: Mutex<HashMap<(JudgeTask, String), usize>>,
    requests: AtomicUsize,
    name: String,
}

impl FixtureBackend {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut script = HashMap::new();
        for e in entries {
            script.insert((e.task, e.feedback_id), e.replies);
        }
        Self {
            script,
            served: Mutex::new(HashMap::new()),
            requests: AtomicUsize::new(0),
            name: "fixture".into(),
        }
    }

    /// Names the transcript so that two fixtures do not share cache entries.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                )
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    /// Number of `complete` calls served so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl JudgeBackend for FixtureBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            backend: self.name.clone(),
            model: "scripted".into(),
            temperature: 0.0,
        }
    }

    fn complete(&self, request: &JudgeRequest) -> Result<String, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let key = (request.task, request.item_id.clone());
        let replies = self.script.get(&key).ok_or_else(|| {
            BackendError::Rejected(format!(
                "no scripted {} reply for `{}`",
                request.task.name(),
                request.item_id
            ))
        })?;
        let idx = {
            let mut served = self.served.lock().unwrap();
            let n = served.entry(key).or_insert(0);
            let idx = (*n).min(replies.len() - 1);
            *n += 1;
            idx
        };
        match &replies[idx] {
            ScriptedReply::Text(t) => Ok(t.clone()),
            ScriptedReply::TransportError(e) => Err(BackendError::Transport(e.clone())),
        }
    }
}

/// Chat-completions style HTTP backend.
pub struct RemoteBackend {
    endpoint: String,
    model: String,
    api_key: String,
    temperature: f64,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Rejected(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            temperature: 0.0,
            client,
        })
    }
}

#[derive(Serialize)]
struct ChatCompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl JudgeBackend for RemoteBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            backend: "remote".into(),
            model: self.model.clone(),
            temperature: self.temperature,
        }
    }

    fn complete(&self, request: &JudgeRequest) -> Result<String, BackendError> {
        let body = ChatCompletionRequest {
            model: &self.model,
            messages: &request.messages,
            temperature: self.temperature,
        };
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => {
                return Err(BackendError::Transport(format!("HTTP {status}: {}", truncate(&text))))
            }
            _ => return Err(BackendError::Rejected(format!("HTTP {status}: {}", truncate(&text)))),
        }
        let parsed: ChatCompletionResponse = serde_json::from_str(&text)
            .map_err(|e| BackendError::Rejected(format!("unexpected response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Rejected("response has no choices".into()))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
