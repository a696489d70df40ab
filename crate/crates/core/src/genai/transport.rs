use std::fmt;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable holding the bearer token for [`HttpTransport`].
pub const API_KEY_ENV: &str = "NARRAVINE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Describer,
    Narrator,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endpoint::Describer => "describer",
            Endpoint::Narrator => "narrator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// Image file attached to a user message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
            image: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
            image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub endpoint: Endpoint,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
    pub deadline_ms: u64,
}

impl ChatRequest {
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum TransportError {
    #[error("service unavailable: {detail}")]
    Unavailable { detail: String },
    #[error("no response within {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {detail}")]
    Malformed { detail: String },
}

pub trait Transport: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;

    /// True when latency is simulated rather than spent in real time.
    fn is_simulated(&self) -> bool {
        false
    }
}

/// Chat-completions client over blocking HTTP.
pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, deadline: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(deadline))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, deadline: Duration) -> Self {
        Self::new(base_url, std::env::var(API_KEY_ENV).ok(), deadline)
    }

    fn body(request: &ChatRequest) -> Result<Value, TransportError> {
        let mut messages = Vec::with_capacity(request.messages.len());
        for m in &request.messages {
            let content = match &m.image {
                None => json!(m.content),
                Some(path) => {
                    let bytes = std::fs::read(path).map_err(|e| TransportError::Unavailable {
                        detail: format!("reading image {path}: {e}"),
                    })?;
                    let data = base64::engine::general_purpose::STANDARD.encode(bytes);
                    json!([
                        { "type": "text", "text": m.content },
                        { "type": "image_url", "image_url": { "url": format!("data:image/png;base64,{data}") } }
                    ])
                }
            };
            messages.push(json!({ "role": m.role, "content": content }));
        }
        Ok(json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": messages,
        }))
    }
}

impl Transport for HttpTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let body = Self::body(request)?;
        let started = Instant::now();
        let payload = serde_json::to_vec(&body).map_err(|e| TransportError::Malformed { detail: e.to_string() })?;
        let mut call = self
            .agent
            .post(format!("{}/chat/completions", self.base_url))
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send(&payload[..]).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout {
                after_ms: request.deadline_ms,
            },
            other => TransportError::Unavailable {
                detail: other.to_string(),
            },
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Malformed { detail: e.to_string() })?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { code: status, body: text });
        }
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| TransportError::Malformed { detail: e.to_string() })?;
        let content = doc["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Malformed {
                detail: "missing choices[0].message.content".into(),
            })?;
        Ok(ChatResponse {
            text: content.to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
