//! The attacker-side generative model: query synthesis from anchors and
//! anchor extraction from stolen text. Ships a deterministic mock (seeded
//! question frames + term-frequency keywords) and an OpenAI-compatible
//! remote client, both behind one interface, plus the prompt templates.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{normalize_text, seeded_hash};
use crate::knowledge::{Anchor, Chunk};
use crate::wire::{ChatMessage, ChatRequest, WireClient, WireError, WireSettings};

pub const DEFAULT_MAX_ANCHORS_PER_CHUNK: usize = 3;
pub const DEFAULT_REMOTE_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_MAX_TOKENS: u32 = 256;

static STOPWORDS_RAW: &str = include_str!("assets/stopwords_en.txt");
static STOPWORDS: OnceLock<std::collections::HashSet<&'static str>> = OnceLock::new();

/// The fixed, versioned English stopword list shipped with the crate.
pub fn stopwords() -> &'static std::collections::HashSet<&'static str> {
    STOPWORDS.get_or_init(|| STOPWORDS_RAW.lines().map(str::trim).collect())
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("generation produced empty text")]
    EmptyGeneration,
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Declarative gateway configuration, serializable into manifests.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LlmSpec {
    Mock {
        seed: u64,
    },
    Remote {
        endpoint: String,
        model_name: String,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default)]
        wire: Option<WireSettings>,
    },
}

fn default_temperature() -> f64 {
    DEFAULT_REMOTE_TEMPERATURE
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateName {
    BaseQueryFromAnchors,
    AnchorsFromText,
}

/// A prompt body with exactly one placeholder slot, `{anchors}` or `{text}`
/// depending on the template role.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(name: TemplateName, body: impl Into<String>) -> Result<Self, LlmError> {
        let body = body.into();
        let (required, forbidden) = match name {
            TemplateName::BaseQueryFromAnchors => ("{anchors}", "{text}"),
            TemplateName::AnchorsFromText => ("{text}", "{anchors}"),
        };
        if !body.contains(required) {
            return Err(LlmError::Template(format!(
                "template body must contain the {required} placeholder"
            )));
        }
        if body.contains(forbidden) {
            return Err(LlmError::Template(format!(
                "template body must not contain the {forbidden} placeholder"
            )));
        }
        Ok(Self { name, body })
    }

    pub fn default_base_query() -> Self {
        Self::new(
            TemplateName::BaseQueryFromAnchors,
            "You are preparing a single short question for a knowledge assistant.\n\
             Write one concise question that naturally asks about all of these topics: \
             {anchors}.\nAnswer with the question text only.",
        )
        .expect("default template is valid")
    }

    pub fn default_anchors_from_text() -> Self {
        Self::new(
            TemplateName::AnchorsFromText,
            "List the most important keywords of the following text as a short \
             comma-separated list (at most a handful, each a single word or a two-word \
             phrase).\nText: {text}",
        )
        .expect("default template is valid")
    }

    pub fn render(&self, value: &str) -> String {
        match self.name {
            TemplateName::BaseQueryFromAnchors => self.body.replace("{anchors}", value),
            TemplateName::AnchorsFromText => self.body.replace("{text}", value),
        }
    }
}

/// Both attacker-side prompt templates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PromptTemplates {
    pub base_query: PromptTemplate,
    pub anchors_from_text: PromptTemplate,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            base_query: PromptTemplate::default_base_query(),
            anchors_from_text: PromptTemplate::default_anchors_from_text(),
        }
    }
}

// Short frames with disjoint filler vocabulary: the anchor terms carry
// the query's weight, the frame barely registers in embedding space.
const QUESTION_FRAMES: [&str; 8] = [
    "Tell me about {topics}.",
    "What about {topics}?",
    "Any details on {topics}?",
    "Describe {topics}.",
    "Explain {topics} briefly.",
    "Information regarding {topics}?",
    "Notes covering {topics}?",
    "Summarize {topics}.",
];

/// The attacker's generative gateway.
pub struct LlmGateway {
    spec: LlmSpec,
    templates: PromptTemplates,
    max_anchors_per_chunk: usize,
    client: WireClient,
}

impl LlmGateway {
    pub fn new(spec: LlmSpec) -> Self {
        let client = match &spec {
            LlmSpec::Remote { wire, .. } => WireClient::new(wire.clone().unwrap_or_default()),
            LlmSpec::Mock { .. } => WireClient::default(),
        };
        Self {
            spec,
            templates: PromptTemplates::default(),
            max_anchors_per_chunk: DEFAULT_MAX_ANCHORS_PER_CHUNK,
            client,
        }
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_max_anchors_per_chunk(mut self, max: usize) -> Self {
        self.max_anchors_per_chunk = max.max(1);
        self
    }

    pub fn spec(&self) -> &LlmSpec {
        &self.spec
    }

    pub fn max_anchors_per_chunk(&self) -> usize {
        self.max_anchors_per_chunk
    }

    /// Builds one short question covering every sampled anchor. The mock is
    /// a pure function of (anchor texts, seed): a seeded choice among fixed
    /// question frames, each anchor included verbatim.
    pub fn generate_base_query(&self, anchors: &[Anchor]) -> Result<String, LlmError> {
        if anchors.is_empty() {
            return Err(LlmError::Contract(
                "generate_base_query requires at least one anchor".to_string(),
            ));
        }
        let topics = join_topic_list(anchors);
        match &self.spec {
            LlmSpec::Mock { seed } => {
                let key: String = anchors
                    .iter()
                    .map(|a| a.text.as_str())
                    .collect::<Vec<_>>()
                    .join("\u{1f}");
                let frame_idx =
                    (seeded_hash(key.as_bytes(), *seed) % QUESTION_FRAMES.len() as u64) as usize;
                Ok(QUESTION_FRAMES[frame_idx].replace("{topics}", &topics))
            }
            LlmSpec::Remote { .. } => {
                let prompt = self.templates.base_query.render(&topics);
                let content = self.chat(&[ChatMessage::new("user", prompt)])?;
                let content = content.trim();
                if content.is_empty() {
                    return Err(LlmError::EmptyGeneration);
                }
                Ok(content.to_string())
            }
        }
    }

    /// Pulls short keywords out of freshly stolen chunks: at most
    /// `max_anchors_per_chunk` per chunk, trimmed and case-folded. The mock
    /// ranks terms by frequency after stopword removal with a seeded
    /// tie-break; unparseable remote output contributes nothing rather than
    /// failing the call.
    pub fn extract_anchors(&self, chunks: &[Chunk]) -> Result<Vec<String>, LlmError> {
        if chunks.is_empty() {
            return Err(LlmError::Contract(
                "extract_anchors requires at least one chunk".to_string(),
            ));
        }
        let mut out = Vec::new();
        for chunk in chunks {
            match &self.spec {
                LlmSpec::Mock { seed } => {
                    out.extend(top_terms(&chunk.text, self.max_anchors_per_chunk, *seed));
                }
                LlmSpec::Remote { .. } => {
                    let prompt = self.templates.anchors_from_text.render(&chunk.text);
                    let reply = self.chat(&[ChatMessage::new("user", prompt)])?;
                    out.extend(parse_keyword_list(&reply, self.max_anchors_per_chunk));
                }
            }
        }
        Ok(out)
    }

    /// Raw chat round trip. The mock answers with a seeded token; the
    /// remote kind honors temperature/max_tokens and retries transient
    /// transport failures with exponential backoff.
    pub fn chat(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::Contract("chat requires messages".to_string()));
        }
        for m in messages {
            if !matches!(m.role.as_str(), "system" | "user" | "assistant") {
                return Err(LlmError::Contract(format!("unknown role {:?}", m.role)));
            }
        }
        match &self.spec {
            LlmSpec::Mock { seed } => {
                let joined: String = messages
                    .iter()
                    .map(|m| format!("{}\u{1e}{}", m.role, m.content))
                    .collect::<Vec<_>>()
                    .join("\u{1f}");
                Ok(format!(
                    "mock-reply-{:016x}",
                    seeded_hash(joined.as_bytes(), *seed)
                ))
            }
            LlmSpec::Remote {
                endpoint,
                model_name,
                temperature,
                max_tokens,
                ..
            } => {
                let request = ChatRequest {
                    model: model_name.clone(),
                    messages: messages.to_vec(),
                    temperature: Some(*temperature),
                    max_tokens: Some(*max_tokens),
                };
                Ok(self.client.chat_completions(endpoint, &request)?)
            }
        }
    }
}

/// Joins anchor texts into a natural list ("a, b and c").
pub(crate) fn join_topic_list(anchors: &[Anchor]) -> String {
    let texts: Vec<&str> = anchors.iter().map(|a| a.text.as_str()).collect();
    match texts.len() {
        1 => texts[0].to_string(),
        2 => format!("{} and {}", texts[0], texts[1]),
        _ => format!(
            "{} and {}",
            texts[..texts.len() - 1].join(", "),
            texts[texts.len() - 1]
        ),
    }
}

/// Splits normalized text into alphanumeric tokens, dropping punctuation.
pub fn content_tokens(text: &str) -> Vec<String> {
    normalize_text(text)
        .split(' ')
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Top-k terms of a text by frequency, stopwords removed, ties broken by a
/// seeded hash so ordering is reproducible but not alphabetical.
pub fn top_terms(text: &str, k: usize, seed: u64) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for token in content_tokens(text) {
        // Keywords are words: too-short tokens, bare numbers, and
        // stopwords all make useless anchors.
        if token.chars().count() < 2
            || token.chars().all(|c| c.is_ascii_digit())
            || stopwords().contains(token.as_str())
        {
            continue;
        }
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut terms: Vec<(String, usize)> = counts.into_iter().collect();
    terms.sort_by(|(ta, ca), (tb, cb)| {
        cb.cmp(ca)
            .then_with(|| {
                seeded_hash(ta.as_bytes(), seed).cmp(&seeded_hash(tb.as_bytes(), seed))
            })
            .then_with(|| ta.cmp(tb))
    });
    terms.into_iter().take(k).map(|(t, _)| t).collect()
}

/// Lenient parse of a model-produced keyword list (commas, newlines,
/// bullets, numbering); invalid items are dropped.
fn parse_keyword_list(reply: &str, k: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for raw in reply.split(|c| c == ',' || c == '\n' || c == ';') {
        let cleaned = raw
            .trim()
            .trim_start_matches(|c: char| {
                c.is_ascii_digit() || c == '-' || c == '*' || c == '.' || c == ')' || c == ' '
            })
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == ':')
            .trim()
            .to_lowercase();
        if cleaned.chars().count() < 2 || cleaned.contains('\n') {
            continue;
        }
        if cleaned.split_whitespace().count() > 3 {
            continue;
        }
        if seen.insert(cleaned.clone()) {
            out.push(cleaned);
            if out.len() == k {
                break;
            }
        }
    }
    out
}
