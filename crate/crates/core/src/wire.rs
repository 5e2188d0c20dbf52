//! OpenAI-compatible wire protocol: request/response types shared by the
//! remote embedder, the remote attacker LLM, the HTTP attack target, and
//! the simulator's chat service, plus a small synchronous HTTP client with
//! bounded retries.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("http status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatChoice {
    pub index: u32,
    pub message: ChatMessage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub id: String,
    pub object: String,
    pub model: String,
    pub choices: Vec<ChatChoice>,
}

impl ChatResponse {
    /// Canonical single-choice assistant reply.
    pub fn assistant(model: &str, id: String, content: String) -> Self {
        Self {
            id,
            object: "chat.completion".to_string(),
            model: model.to_string(),
            choices: vec![ChatChoice {
                index: 0,
                message: ChatMessage::new("assistant", content),
                finish_reason: Some("stop".to_string()),
            }],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingsRequest {
    pub model: String,
    pub input: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingData {
    pub index: usize,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingsResponse {
    pub data: Vec<EmbeddingData>,
}

/// Retry/timeout settings for outbound requests. The total time spent in
/// one logical call never exceeds `(retries + 1) * timeout`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireSettings {
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for WireSettings {
    fn default() -> Self {
        Self {
            timeout_ms: 30_000,
            retries: 2,
            backoff_base_ms: 200,
        }
    }
}

/// Synchronous JSON-over-HTTP client. One instance per remote component.
#[derive(Debug, Clone)]
pub struct WireClient {
    settings: WireSettings,
}

impl WireClient {
    pub fn new(settings: WireSettings) -> Self {
        Self { settings }
    }

    pub fn settings(&self) -> &WireSettings {
        &self.settings
    }

    /// POSTs a JSON body and deserializes a JSON response, retrying
    /// transient failures with exponential backoff under a hard deadline.
    pub fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, WireError> {
        let timeout = Duration::from_millis(self.settings.timeout_ms);
        let deadline = Instant::now() + timeout * (self.settings.retries + 1);
        let payload = serde_json::to_value(body)
            .map_err(|e| WireError::Protocol(format!("request serialization: {e}")))?;

        let mut last_err = WireError::Transport("request not attempted".to_string());
        for attempt in 0..=self.settings.retries {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            let per_attempt = timeout.min(deadline - now);
            match ureq::post(url)
                .timeout(per_attempt)
                .send_json(payload.clone())
            {
                Ok(resp) => {
                    return resp
                        .into_json::<R>()
                        .map_err(|e| WireError::Protocol(format!("response body: {e}")));
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let text = resp.into_string().unwrap_or_default();
                    last_err = WireError::Status { code, body: text };
                }
                Err(ureq::Error::Transport(t)) => {
                    last_err = WireError::Transport(t.to_string());
                }
            }
            if attempt < self.settings.retries {
                let backoff =
                    Duration::from_millis(self.settings.backoff_base_ms) * 2u32.pow(attempt);
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                std::thread::sleep(backoff.min(deadline - now));
            }
        }
        Err(last_err)
    }

    /// Chat-completions round trip; returns the assistant message content.
    pub fn chat_completions(
        &self,
        endpoint: &str,
        request: &ChatRequest,
    ) -> Result<String, WireError> {
        let url = format!("{}/v1/chat/completions", endpoint.trim_end_matches('/'));
        let response: serde_json::Value = self.post_json(&url, request)?;
        let content = response
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                WireError::Protocol("missing choices[0].message.content".to_string())
            })?;
        Ok(content.to_string())
    }

    /// Embeddings round trip; returns one vector per input, in input order.
    pub fn embeddings(
        &self,
        endpoint: &str,
        request: &EmbeddingsRequest,
    ) -> Result<Vec<Vec<f64>>, WireError> {
        let url = format!("{}/v1/embeddings", endpoint.trim_end_matches('/'));
        let response: EmbeddingsResponse = self.post_json(&url, request)?;
        if response.data.len() != request.input.len() {
            return Err(WireError::Protocol(format!(
                "expected {} embeddings, got {}",
                request.input.len(),
                response.data.len()
            )));
        }
        let mut ordered = response.data;
        ordered.sort_by_key(|d| d.index);
        Ok(ordered.into_iter().map(|d| d.embedding).collect())
    }
}

impl Default for WireClient {
    fn default() -> Self {
        Self::new(WireSettings::default())
    }
}
