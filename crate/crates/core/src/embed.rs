//! The attacker-side text embedder abstraction with two implementations:
//! a seeded offline n-gram embedder and an OpenAI-compatible wire adapter.
//! The target simulator reuses the same abstraction with its own seed, so
//! the two sides never share an embedding space.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::knowledge::Embedding;
use crate::wire::{EmbeddingsRequest, WireClient, WireError, WireSettings};

pub const MIN_DIM: usize = 8;
pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding dimension {0} is below the minimum of {MIN_DIM}")]
    DimTooSmall(usize),
    #[error("service returned dimension {got}, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("batch element {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<EmbedError>,
    },
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Declarative embedder configuration, serializable into manifests.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderSpec {
    DeterministicNgram {
        dim: usize,
        seed: u64,
    },
    Remote {
        endpoint: String,
        model_name: String,
        dim: usize,
        #[serde(default)]
        wire: Option<WireSettings>,
    },
}

impl EmbedderSpec {
    pub fn deterministic(dim: usize, seed: u64) -> Self {
        EmbedderSpec::DeterministicNgram { dim, seed }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbedderSpec::DeterministicNgram { dim, .. } => *dim,
            EmbedderSpec::Remote { dim, .. } => *dim,
        }
    }

    /// Instantiates the embedder this spec describes.
    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        if self.dim() < MIN_DIM {
            return Err(EmbedError::DimTooSmall(self.dim()));
        }
        match self {
            EmbedderSpec::DeterministicNgram { dim, seed } => {
                Ok(Box::new(DeterministicEmbedder::new(*dim, *seed)?))
            }
            EmbedderSpec::Remote {
                endpoint,
                model_name,
                dim,
                wire,
            } => Ok(Box::new(RemoteEmbedder {
                endpoint: endpoint.clone(),
                model_name: model_name.clone(),
                dim: *dim,
                client: WireClient::new(wire.clone().unwrap_or_default()),
            })),
        }
    }
}

/// Text-to-unit-vector mapping. All outputs of one instance share a
/// dimension and have L2 norm 1.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                self.embed(t).map_err(|e| EmbedError::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// NFC-normalize, lowercase, and collapse whitespace so cosmetic variants
/// of the same text embed identically.
pub fn normalize_text(text: &str) -> String {
    let folded: String = text.nfc().collect::<String>().to_lowercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Seeded FNV-1a over bytes; stable across platforms and releases.
pub(crate) fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Offline embedder: hashed bag of character 3-grams and word unigrams with
/// signed buckets, L2-normalized. Similar texts share features and land
/// close in cosine space; the seed makes distinct instances mutually
/// unintelligible.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    dim: usize,
    seed: u64,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim < MIN_DIM {
            return Err(EmbedError::DimTooSmall(dim));
        }
        Ok(Self { dim, seed })
    }

    fn add_feature(&self, acc: &mut [f64], feature: &str) {
        let h = seeded_hash(feature.as_bytes(), self.seed);
        let bucket = ((h >> 1) % self.dim as u64) as usize;
        let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
}

impl Embedder for DeterministicEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let norm = normalize_text(text);
        if norm.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut acc = vec![0.0f64; self.dim];
        for word in norm.split(' ') {
            self.add_feature(&mut acc, &format!("w:{word}"));
        }
        let chars: Vec<char> = norm.chars().collect();
        let mut gram = String::with_capacity(8);
        for window in chars.windows(3) {
            gram.clear();
            gram.push_str("g:");
            gram.extend(window);
            self.add_feature(&mut acc, &gram);
        }
        match Embedding::unit_from(acc) {
            Ok(e) => Ok(e),
            Err(_) => {
                // Signed buckets canceled out exactly; fall back to a
                // single deterministic spike so the output stays unit norm.
                let mut acc = vec![0.0f64; self.dim];
                let h = seeded_hash(norm.as_bytes(), self.seed);
                acc[(h % self.dim as u64) as usize] = 1.0;
                Ok(Embedding::from_raw(acc))
            }
        }
    }
}

/// Wire adapter for an OpenAI-compatible embeddings service. Returned
/// vectors are length-checked against the declared dimension and rescaled
/// to unit norm.
pub struct RemoteEmbedder {
    endpoint: String,
    model_name: String,
    dim: usize,
    client: WireClient,
}

impl RemoteEmbedder {
    fn normalize_response(&self, vectors: Vec<Vec<f64>>) -> Result<Vec<Embedding>, EmbedError> {
        vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(EmbedError::DimMismatch {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                Embedding::unit_from(v)
                    .map_err(|_| WireError::Protocol("zero-norm embedding".to_string()).into())
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        for (index, t) in texts.iter().enumerate() {
            if normalize_text(t).is_empty() {
                return Err(EmbedError::Batch {
                    index,
                    source: Box::new(EmbedError::EmptyText),
                });
            }
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let request = EmbeddingsRequest {
            model: self.model_name.clone(),
            input: texts.iter().map(|t| t.to_string()).collect(),
        };
        let vectors = self.client.embeddings(&self.endpoint, &request)?;
        self.normalize_response(vectors)
    }
}
