//! The attacker's view of a target: a chat surface and nothing else.
//! In-process and HTTP-backed variants behave identically, keeping the
//! attack genuinely black-box regardless of deployment.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::simulator::TargetAgent;
use crate::wire::{ChatMessage, ChatRequest, WireClient, WireError};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("target transport failure: {0}")]
    Transport(String),
    #[error("target protocol error: {0}")]
    Protocol(String),
}

impl From<WireError> for TargetError {
    fn from(err: WireError) -> Self {
        match err {
            WireError::Protocol(p) => TargetError::Protocol(p),
            other => TargetError::Transport(other.to_string()),
        }
    }
}

/// Anything the attacker can send a query to and read an answer from.
pub trait AttackTarget {
    fn chat(&mut self, query: &str) -> Result<String, TargetError>;
}

/// Direct handle to a simulator instance in the same process.
pub struct InProcessTarget {
    agent: Arc<Mutex<TargetAgent>>,
}

impl InProcessTarget {
    pub fn new(agent: TargetAgent) -> Self {
        Self {
            agent: Arc::new(Mutex::new(agent)),
        }
    }

    pub fn shared(agent: Arc<Mutex<TargetAgent>>) -> Self {
        Self { agent }
    }

    pub fn agent(&self) -> Arc<Mutex<TargetAgent>> {
        Arc::clone(&self.agent)
    }
}

impl AttackTarget for InProcessTarget {
    fn chat(&mut self, query: &str) -> Result<String, TargetError> {
        Ok(self.agent.lock().expect("agent lock").answer(query))
    }
}

/// OpenAI-compatible chat endpoint reached over the wire.
pub struct HttpTarget {
    endpoint: String,
    model: String,
    client: WireClient,
}

impl HttpTarget {
    pub fn new(endpoint: impl Into<String>, client: WireClient) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: "target-agent".to_string(),
            client,
        }
    }
}

impl AttackTarget for HttpTarget {
    fn chat(&mut self, query: &str) -> Result<String, TargetError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::new("user", query)],
            temperature: None,
            max_tokens: None,
        };
        Ok(self.client.chat_completions(&self.endpoint, &request)?)
    }
}

/// Replays canned responses in order; used to exercise parsers and failure
/// paths without a simulator. Records every query it receives.
pub struct ScriptedTarget {
    responses: VecDeque<String>,
    fallback: String,
    pub queries: Vec<String>,
}

impl ScriptedTarget {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses: responses.into(),
            fallback: "I cannot answer that.".to_string(),
            queries: Vec::new(),
        }
    }

    /// Always replies with the same text.
    pub fn constant(text: &str) -> Self {
        Self {
            responses: VecDeque::new(),
            fallback: text.to_string(),
            queries: Vec::new(),
        }
    }
}

impl AttackTarget for ScriptedTarget {
    fn chat(&mut self, query: &str) -> Result<String, TargetError> {
        self.queries.push(query.to_string());
        Ok(self
            .responses
            .pop_front()
            .unwrap_or_else(|| self.fallback.clone()))
    }
}
