//! Core value types (chunks, embeddings, anchors, stolen knowledge base)
//! and the vector operations shared by every other module.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by vector operations and collection insertions.
#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("softmax requires a nonempty, finite score list")]
    EmptyScores,
    #[error("softmax input contains a non-finite value at index {0}")]
    NonFiniteScore(usize),
    #[error("nearest-neighbor lookup on an empty store")]
    EmptyStore,
    #[error("text is empty after trimming")]
    EmptyText,
}

/// Where a chunk came from: the target's own knowledge base, or the
/// attacker's replica of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkSource {
    GroundTruth,
    Stolen,
}

/// A unit of knowledge text. `step` is the attack iteration at which a
/// stolen chunk was acquired (0 for ground truth).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub text: String,
    pub source: ChunkSource,
    pub step: u64,
}

impl Chunk {
    /// Builds a chunk, rejecting text that is empty after trimming.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: ChunkSource,
        step: u64,
    ) -> Result<Self, KnowledgeError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        Ok(Self {
            id: id.into(),
            text,
            source,
            step,
        })
    }
}

/// A fixed-dimension real vector. Embedders normalize at creation, so
/// stored embeddings are unit length and similarity reduces to a dot
/// product; `cosine_sim` still handles arbitrary nonzero vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Wraps raw values without rescaling.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Wraps values and scales them to unit L2 norm. Zero vectors are
    /// rejected.
    pub fn unit_from(values: Vec<f64>) -> Result<Self, KnowledgeError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KnowledgeError::ZeroVector);
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity of two nonzero vectors of equal dimension, in [-1, 1].
/// For unit vectors this equals the dot product.
pub fn cosine_sim(a: &Embedding, b: &Embedding) -> Result<f64, KnowledgeError> {
    if a.dim() != b.dim() {
        return Err(KnowledgeError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let norm_a = a.norm();
    let norm_b = b.norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(KnowledgeError::ZeroVector);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Numerically stable softmax (max-subtraction). Output sums to 1 and every
/// entry is strictly positive.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>, KnowledgeError> {
    if scores.is_empty() {
        return Err(KnowledgeError::EmptyScores);
    }
    if let Some(idx) = scores.iter().position(|s| !s.is_finite()) {
        return Err(KnowledgeError::NonFiniteScore(idx));
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Index and similarity of the store entry most similar to `query`.
/// Ties break toward the lowest index.
pub fn nearest(query: &Embedding, store: &[Embedding]) -> Result<(usize, f64), KnowledgeError> {
    if store.is_empty() {
        return Err(KnowledgeError::EmptyStore);
    }
    let mut best_idx = 0;
    let mut best_sim = cosine_sim(query, &store[0])?;
    for (idx, candidate) in store.iter().enumerate().skip(1) {
        let sim = cosine_sim(query, candidate)?;
        if sim > best_sim {
            best_sim = sim;
            best_idx = idx;
        }
    }
    Ok((best_idx, best_sim))
}

/// True when some stored embedding reaches `threshold` similarity with the
/// candidate. An empty store holds no duplicates.
pub fn is_duplicate(
    candidate: &Embedding,
    store: &[Embedding],
    threshold: f64,
) -> Result<bool, KnowledgeError> {
    if store.is_empty() {
        return Ok(false);
    }
    let (_, sim) = nearest(candidate, store)?;
    Ok(sim >= threshold)
}

/// A keyword/topic the attacker tracks. Text is trimmed and case-folded at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub text: String,
    pub embedding: Embedding,
    pub created_step: u64,
}

impl Anchor {
    pub fn new(
        text: &str,
        embedding: Embedding,
        created_step: u64,
    ) -> Result<Self, KnowledgeError> {
        let text = text.trim().to_lowercase();
        if text.is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        Ok(Self {
            text,
            embedding,
            created_step,
        })
    }
}

/// Outcome of inserting into a similarity-deduplicated collection: either
/// the item went in at `Inserted(index)`, or it matched an existing entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(usize),
    Duplicate { nearest: usize },
}

impl InsertOutcome {
    pub fn is_inserted(&self) -> bool {
        matches!(self, InsertOutcome::Inserted(_))
    }
}

/// Anchors with parallel nonnegative relevance scores. Insertion enforces
/// the pairwise-similarity bound: no two stored anchors reach `alpha2`.
#[derive(Debug, Clone)]
pub struct AnchorLedger {
    anchors: Vec<Anchor>,
    relevances: Vec<f64>,
    alpha2: f64,
}

impl AnchorLedger {
    pub fn new(alpha2: f64) -> Self {
        Self {
            anchors: Vec::new(),
            relevances: Vec::new(),
            alpha2,
        }
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchor(&self, idx: usize) -> &Anchor {
        &self.anchors[idx]
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn relevance(&self, idx: usize) -> f64 {
        self.relevances[idx]
    }

    pub fn relevances(&self) -> &[f64] {
        &self.relevances
    }

    /// Highest relevance, or 0 for an empty ledger.
    pub fn max_relevance(&self) -> f64 {
        self.relevances.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of dead anchors (relevance exactly zero).
    pub fn count_zero(&self) -> usize {
        self.relevances.iter().filter(|r| **r == 0.0).count()
    }

    /// Inserts the anchor with the given relevance unless it reaches alpha2
    /// similarity with an existing anchor, in which case the nearest match
    /// is reported instead.
    pub fn match_or_insert(
        &mut self,
        anchor: Anchor,
        relevance: f64,
    ) -> Result<InsertOutcome, KnowledgeError> {
        debug_assert!(relevance >= 0.0);
        let embeddings: Vec<&Embedding> = self.anchors.iter().map(|a| &a.embedding).collect();
        if let Some((idx, sim)) = nearest_ref(&anchor.embedding, &embeddings)? {
            if sim >= self.alpha2 {
                return Ok(InsertOutcome::Duplicate { nearest: idx });
            }
        }
        self.anchors.push(anchor);
        self.relevances.push(relevance.max(0.0));
        Ok(InsertOutcome::Inserted(self.anchors.len() - 1))
    }

    /// Nearest stored anchor to `query`, if any.
    pub fn nearest(&self, query: &Embedding) -> Result<Option<(usize, f64)>, KnowledgeError> {
        let embeddings: Vec<&Embedding> = self.anchors.iter().map(|a| &a.embedding).collect();
        nearest_ref(query, &embeddings)
    }

    /// Subtracts `penalty` from the anchor's relevance, clamping at zero.
    pub fn penalize(&mut self, idx: usize, penalty: f64) {
        debug_assert!(penalty >= 0.0);
        self.relevances[idx] = (self.relevances[idx] - penalty).max(0.0);
    }
}

/// The attacker's replica of the target knowledge base. Insertion enforces
/// pairwise similarity strictly below `alpha1`, so the stored chunk count is
/// by construction the unique-chunk count.
#[derive(Debug, Clone)]
pub struct StolenKnowledgeBase {
    chunks: Vec<Chunk>,
    embeddings: Vec<Embedding>,
    alpha1: f64,
}

impl StolenKnowledgeBase {
    pub fn new(alpha1: f64) -> Self {
        Self {
            chunks: Vec::new(),
            embeddings: Vec::new(),
            alpha1,
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    /// Stores the chunk text unless it duplicates (≥ alpha1) something
    /// already stored. Ids are assigned sequentially.
    pub fn insert(
        &mut self,
        text: &str,
        embedding: Embedding,
        step: u64,
    ) -> Result<InsertOutcome, KnowledgeError> {
        if is_duplicate(&embedding, &self.embeddings, self.alpha1)? {
            let (idx, _) = nearest(&embedding, &self.embeddings)?;
            return Ok(InsertOutcome::Duplicate { nearest: idx });
        }
        let id = format!("s{:05}", self.chunks.len() + 1);
        let chunk = Chunk::new(id, text, ChunkSource::Stolen, step)?;
        self.chunks.push(chunk);
        self.embeddings.push(embedding);
        Ok(InsertOutcome::Inserted(self.chunks.len() - 1))
    }

    /// Distinct ids currently stored (sanity helper for tests).
    pub fn ids(&self) -> BTreeSet<&str> {
        self.chunks.iter().map(|c| c.id.as_str()).collect()
    }
}

fn nearest_ref(
    query: &Embedding,
    store: &[&Embedding],
) -> Result<Option<(usize, f64)>, KnowledgeError> {
    if store.is_empty() {
        return Ok(None);
    }
    let mut best_idx = 0;
    let mut best_sim = cosine_sim(query, store[0])?;
    for (idx, candidate) in store.iter().enumerate().skip(1) {
        let sim = cosine_sim(query, candidate)?;
        if sim > best_sim {
            best_sim = sim;
            best_idx = idx;
        }
    }
    Ok(Some((best_idx, best_sim)))
}
