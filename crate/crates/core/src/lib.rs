//! # ragleak-core
//!
//! A harness for studying knowledge-base leakage in retrieval-augmented
//! generation (RAG) systems. The crate has three sides:
//!
//! 1. **Attacker** — an adaptive, black-box extraction engine
//!    ([`engine`]) that steers injection queries with anchor keywords and
//!    relevance scores, plus a static-query baseline ([`baseline`]) for
//!    comparison runs. Both talk to a target through the same
//!    [`target::AttackTarget`] interface, either in-process or over HTTP.
//! 2. **Target** — a deterministic, fully instrumented RAG agent
//!    ([`simulator`]) with a seeded top-k retriever and a configurable
//!    injection-compliance model, runnable in-process or as an
//!    OpenAI-compatible chat service.
//! 3. **Evaluator** — leakage metrics ([`eval`]): navigation coverage,
//!    leaked knowledge (ROUGE-L at 0.5 with nearest-embedding pairing),
//!    leaked/unique chunk counts, and query-generation timing.
//!
//! Everything is seeded: two runs from the same manifest produce
//! byte-identical attack logs in mock mode (see [`artifacts`]).

pub mod artifacts;
pub mod baseline;
pub mod commands;
pub mod embed;
pub mod engine;
pub mod eval;
pub mod knowledge;
pub mod llm;
pub mod simulator;
pub mod target;
pub mod wire;

pub use knowledge::{Anchor, AnchorLedger, Chunk, ChunkSource, Embedding, StolenKnowledgeBase};
