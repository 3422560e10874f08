use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::template::AgentRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend script exhausted")]
    ScriptExhausted,
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("transport: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("call budget of {limit} exceeded")]
    BudgetExceeded { limit: u32 },
}

/// A chat-completion service. Implementations are stateless per call.
pub trait ChatBackend: Send + Sync {
    /// Returns the assistant text. Never `Ok("")`.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;

    /// Same as `complete`, told which agent is asking. Wrappers that account
    /// per role override this.
    fn complete_for(&self, role: AgentRole, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let _ = role;
        self.complete(messages)
    }

    fn supports_files(&self) -> bool {
        false
    }

    fn supports_images(&self) -> bool {
        false
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }

    fn complete_for(&self, role: AgentRole, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete_for(role, messages)
    }

    fn supports_files(&self) -> bool {
        (**self).supports_files()
    }

    fn supports_images(&self) -> bool {
        (**self).supports_images()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete(messages)
    }

    fn complete_for(&self, role: AgentRole, messages: &[ChatMessage]) -> Result<String, BackendError> {
        (**self).complete_for(role, messages)
    }

    fn supports_files(&self) -> bool {
        (**self).supports_files()
    }

    fn supports_images(&self) -> bool {
        (**self).supports_images()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring the concatenated prompt must contain; `None` matches anything.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn any(response: impl Into<String>) -> Self {
        Self { when: None, response: response.into() }
    }

    pub fn keyed(when: impl Into<String>, response: impl Into<String>) -> Self {
        Self { when: Some(when.into()), response: response.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub entries: Vec<ScriptEntry>,
}

#[derive(Default)]
struct ScriptState {
    pending: Vec<ScriptEntry>,
    calls: Vec<Vec<ChatMessage>>,
}

/// Replays canned responses. Each call consumes the first pending entry whose
/// key occurs in the prompt.
#[derive(Default)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { state: Mutex::new(ScriptState { pending: entries, calls: Vec::new() }) }
    }

    /// Unkeyed entries, answered strictly in order.
    pub fn from_responses<I, T>(responses: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        Self::new(responses.into_iter().map(ScriptEntry::any).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let script: Script = serde_json::from_str(text).map_err(|e| BackendError::Config(format!("script: {e}")))?;
        Ok(Self::new(script.entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn push(&self, entry: ScriptEntry) {
        self.lock().pending.push(entry);
    }

    pub fn remaining(&self) -> usize {
        self.lock().pending.len()
    }

    pub fn call_count(&self) -> usize {
        self.lock().calls.len()
    }

    /// Every prompt received so far, in call order.
    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.lock().calls.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ScriptState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let prompt: String = messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        let mut state = self.lock();
        state.calls.push(messages.to_vec());
        let pos = state
            .pending
            .iter()
            .position(|e| e.when.as_deref().is_none_or(|k| prompt.contains(k)))
            .ok_or(BackendError::ScriptExhausted)?;
        let entry = state.pending.remove(pos);
        if entry.response.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(entry.response)
    }
}
