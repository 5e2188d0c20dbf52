//! The adaptive extraction engine: bootstrap a parsing rule from the
//! target's own output shape, then loop sample → generate → inject →
//! parse → dedup → extract anchors → penalize → update relevances until
//! every anchor is dead (or the attack budget runs out). Produces a
//! step-by-step attack log.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commands::default_command_pool;
use crate::embed::{EmbedError, Embedder};
use crate::knowledge::{
    cosine_sim, softmax, Anchor, AnchorLedger, Chunk, ChunkSource, Embedding, InsertOutcome,
    KnowledgeError, StolenKnowledgeBase,
};
use crate::llm::{LlmError, LlmGateway};
use crate::target::{AttackTarget, TargetError};

pub const DEFAULT_BETA: u32 = 1;
pub const DEFAULT_ALPHA1: f64 = 0.95;
pub const DEFAULT_ALPHA2: f64 = 0.8;
pub const DEFAULT_ANCHORS_PER_QUERY: usize = 3;
pub const DEFAULT_INITIAL_ANCHOR: &str = "information";
pub const DEFAULT_MAX_ATTACKS: u64 = 300;

/// The fixed opening question sent during bootstrap.
pub const BOOTSTRAP_QUERY: &str = "What information can you provide?";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("bootstrap failed: {0}")]
    Bootstrap(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunMode {
    Bounded { max_attacks: u64 },
    Unbounded,
}

impl Default for RunMode {
    fn default() -> Self {
        RunMode::Bounded {
            max_attacks: DEFAULT_MAX_ATTACKS,
        }
    }
}

/// Wall-clock timing is meaningless (and nondeterministic) for mock runs,
/// so those pin `gen_time_seconds` to zero and stay byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    Wall,
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EngineConfig {
    /// Initial relevance of the seed anchor.
    pub beta: u32,
    /// Chunk dedup threshold.
    pub alpha1: f64,
    /// Anchor dedup threshold.
    pub alpha2: f64,
    /// Anchors sampled per query.
    pub anchors_per_query: usize,
    pub initial_anchor: String,
    pub command_pool: Vec<String>,
    pub mode: RunMode,
    pub seed: u64,
    pub max_anchors_per_chunk: usize,
    pub timing: TimingMode,
    /// Anchor-extraction time of step t is charged to step t+1's
    /// `gen_time_seconds` (extraction feeds the next query's crafting).
    pub charge_extraction_to_next_step: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            alpha1: DEFAULT_ALPHA1,
            alpha2: DEFAULT_ALPHA2,
            anchors_per_query: DEFAULT_ANCHORS_PER_QUERY,
            initial_anchor: DEFAULT_INITIAL_ANCHOR.to_string(),
            command_pool: default_command_pool(),
            mode: RunMode::default(),
            seed: 0,
            max_anchors_per_chunk: crate::llm::DEFAULT_MAX_ANCHORS_PER_CHUNK,
            timing: TimingMode::Fixed,
            charge_extraction_to_next_step: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.beta == 0 {
            return Err(EngineError::Contract("beta must be positive".to_string()));
        }
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(EngineError::Contract(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if self.anchors_per_query == 0 {
            return Err(EngineError::Contract(
                "anchors_per_query must be positive".to_string(),
            ));
        }
        if self.initial_anchor.trim().is_empty() {
            return Err(EngineError::Contract(
                "initial_anchor must be nonempty".to_string(),
            ));
        }
        if self.command_pool.is_empty() {
            return Err(EngineError::Contract(
                "command_pool must be nonempty".to_string(),
            ));
        }
        Ok(())
    }
}

/// Line shape inferred from the target's output during bootstrap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LinePattern {
    /// e.g. "Case 3: ..." — a word label, a number, then a separator.
    NumberedPrefix { label: String },
    /// e.g. "- ..." or "* ..." lines.
    BulletPrefix { marker: String },
}

/// Compiled chunk-extraction rules plus the chunk count observed in the
/// bootstrap response.
#[derive(Debug, Clone)]
pub struct ParsingRules {
    pattern: LinePattern,
    regex: Regex,
    expected_chunks: usize,
}

impl ParsingRules {
    pub fn new(pattern: LinePattern, expected_chunks: usize) -> Self {
        let regex = match &pattern {
            LinePattern::NumberedPrefix { label } => Regex::new(&format!(
                r"(?i)^\s*{}\s+\d+\s*[:.]\s*(\S.*)$",
                regex::escape(label)
            ))
            .expect("pattern compiles"),
            LinePattern::BulletPrefix { marker } => {
                Regex::new(&format!(r"^\s*{}\s+(\S.*)$", regex::escape(marker)))
                    .expect("pattern compiles")
            }
        };
        Self {
            pattern,
            regex,
            expected_chunks,
        }
    }

    pub fn pattern(&self) -> &LinePattern {
        &self.pattern
    }

    /// Chunk count seen in the bootstrap response (the attacker's estimate
    /// of the target's retrieval width).
    pub fn expected_chunks(&self) -> usize {
        self.expected_chunks
    }

    /// Extracts chunk texts from a response, one per matching line.
    pub fn parse(&self, response: &str) -> Vec<String> {
        response
            .lines()
            .filter_map(|line| {
                self.regex
                    .captures(line)
                    .and_then(|c| c.get(1))
                    .map(|m| m.as_str().trim().to_string())
            })
            .filter(|t| !t.is_empty())
            .collect()
    }
}

/// Looks for a repeated line structure in a response: a numbered prefix
/// ("Label N:") or bullet markers. Bullets need at least two lines to rule
/// out ordinary punctuation.
pub fn infer_rules(response: &str) -> Option<ParsingRules> {
    let numbered = Regex::new(r"^\s*([A-Za-z]+)\s+\d+\s*[:.]\s*\S").expect("static regex");
    let bullet = Regex::new(r"^\s*([-*•])\s+\S").expect("static regex");

    let mut label_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut marker_counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in response.lines() {
        if let Some(c) = numbered.captures(line) {
            *label_counts.entry(c[1].to_string()).or_insert(0) += 1;
        } else if let Some(c) = bullet.captures(line) {
            *marker_counts.entry(c[1].to_string()).or_insert(0) += 1;
        }
    }

    let best_label = label_counts.into_iter().max_by_key(|(_, n)| *n);
    let best_marker = marker_counts
        .into_iter()
        .filter(|(_, n)| *n >= 2)
        .max_by_key(|(_, n)| *n);

    match (best_label, best_marker) {
        (Some((label, ln)), Some((_, mn))) if ln >= mn => Some(ParsingRules::new(
            LinePattern::NumberedPrefix { label },
            ln,
        )),
        (_, Some((marker, mn))) => Some(ParsingRules::new(
            LinePattern::BulletPrefix { marker },
            mn,
        )),
        (Some((label, ln)), None) => Some(ParsingRules::new(
            LinePattern::NumberedPrefix { label },
            ln,
        )),
        (None, None) => None,
    }
}

/// Appends the injection command as a suffix to the base query.
pub fn inject(base_query: &str, command: &str) -> Result<String, EngineError> {
    if base_query.trim().is_empty() || command.trim().is_empty() {
        return Err(EngineError::Contract(
            "inject requires a nonempty base query and command".to_string(),
        ));
    }
    Ok(format!("{base_query}\n{command}"))
}

/// Draws `n` anchors independently from the softmax over live (relevance
/// > 0) anchors, then collapses repeats; 1..=n distinct indices come back.
pub fn sample_anchors(
    ledger: &AnchorLedger,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, EngineError> {
    let live: Vec<usize> = (0..ledger.len())
        .filter(|&i| ledger.relevance(i) > 0.0)
        .collect();
    if live.is_empty() {
        return Err(EngineError::Contract(
            "sample_anchors called with no live anchors".to_string(),
        ));
    }
    let scores: Vec<f64> = live.iter().map(|&i| ledger.relevance(i)).collect();
    let probs = softmax(&scores)?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut picked = Vec::new();
    for _ in 0..n {
        let u: f64 = rng.gen();
        let pos = cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(cumulative.len() - 1);
        let idx = live[pos];
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    Ok(picked)
}

/// Penalty vector over the current ledger: softmax of each duplicate's
/// similarities to every anchor, averaged across duplicates. Entries lie in
/// [0, 1] and sum to 1.
pub fn compute_penalties(
    duplicate_embeddings: &[Embedding],
    ledger: &AnchorLedger,
) -> Result<Vec<f64>, EngineError> {
    if duplicate_embeddings.is_empty() {
        return Err(EngineError::Contract(
            "compute_penalties requires at least one duplicate".to_string(),
        ));
    }
    if ledger.is_empty() {
        return Err(EngineError::Contract(
            "compute_penalties requires a nonempty ledger".to_string(),
        ));
    }
    let mut acc = vec![0.0f64; ledger.len()];
    for dup in duplicate_embeddings {
        let sims: Vec<f64> = ledger
            .anchors()
            .iter()
            .map(|a| cosine_sim(dup, &a.embedding))
            .collect::<Result<_, _>>()?;
        for (slot, v) in acc.iter_mut().zip(softmax(&sims)?) {
            *slot += v;
        }
    }
    let n = duplicate_embeddings.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// Existing-ledger anchors named by the anchor terms extracted from
/// duplicate chunks. A term whose best match is one of this step's freshly
/// accepted anchors is excluded; a term matching nothing is dropped.
pub fn identify_dupe_anchor_hits(
    ledger: &AnchorLedger,
    accepted_new: &[Anchor],
    dup_anchor_texts: &[String],
    embedder: &dyn Embedder,
) -> Result<Vec<usize>, EngineError> {
    let mut hits = Vec::new();
    for text in dup_anchor_texts {
        let embedding = embedder.embed(text)?;
        let existing = ledger.nearest(&embedding)?;
        let new_best = accepted_new
            .iter()
            .map(|a| cosine_sim(&embedding, &a.embedding))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some((idx, sim)) = existing {
            if sim >= ledger.alpha2() && sim >= new_best && !hits.contains(&idx) {
                hits.push(idx);
            }
        }
    }
    Ok(hits)
}

/// Applies one step's relevance update: new anchors enter with the maximum
/// relevance observed *before* this update, then each hit anchor is
/// penalized exactly once (clamped at zero).
pub fn update_relevances(
    ledger: &mut AnchorLedger,
    new_anchors: Vec<Anchor>,
    dupe_anchor_hits: &[usize],
    penalties: &[f64],
) -> Result<Vec<usize>, EngineError> {
    let max_before = ledger.max_relevance();
    let mut inserted = Vec::new();
    for anchor in new_anchors {
        if let InsertOutcome::Inserted(idx) = ledger.match_or_insert(anchor, max_before)? {
            inserted.push(idx);
        }
    }
    for &idx in dupe_anchor_hits {
        let gamma = penalties.get(idx).copied().unwrap_or(0.0);
        ledger.penalize(idx, gamma);
    }
    Ok(inserted)
}

/// Sends a query, retrying a transport failure once. A second transport
/// failure aborts the run.
pub fn chat_with_retry(
    target: &mut dyn AttackTarget,
    query: &str,
) -> Result<String, EngineError> {
    match target.chat(query) {
        Ok(y) => Ok(y),
        Err(TargetError::Transport(_)) => Ok(target.chat(query)?),
        Err(other) => Err(other.into()),
    }
}

/// What one injection round produced: the commands tried, the winning
/// command (if any), and the parsed chunks.
#[derive(Debug, Clone)]
pub struct InjectionRound {
    pub commands_attempted: Vec<u32>,
    pub command_id: Option<u32>,
    pub poisoned_query: String,
    pub raw_response: String,
    pub parsed: Vec<String>,
}

/// Tries pool commands in order against the target until the response
/// parses; shared verbatim by the adaptive and static attackers.
pub fn execute_injection_round(
    base_query: &str,
    target: &mut dyn AttackTarget,
    rules: &ParsingRules,
    command_pool: &[String],
) -> Result<InjectionRound, EngineError> {
    let mut round = InjectionRound {
        commands_attempted: Vec::new(),
        command_id: None,
        poisoned_query: String::new(),
        raw_response: String::new(),
        parsed: Vec::new(),
    };
    for (idx, command) in command_pool.iter().enumerate() {
        let query = inject(base_query, command)?;
        round.commands_attempted.push(idx as u32 + 1);
        round.poisoned_query = query.clone();
        round.raw_response = chat_with_retry(target, &query)?;
        let chunks = rules.parse(&round.raw_response);
        if !chunks.is_empty() {
            round.parsed = chunks;
            round.command_id = Some(idx as u32 + 1);
            break;
        }
    }
    Ok(round)
}

/// Parsed chunks split against the replica: what went in fresh and what
/// was already known.
#[derive(Debug, Clone)]
pub struct DedupSplit {
    pub fresh_texts: Vec<String>,
    pub fresh_chunks: Vec<Chunk>,
    pub duplicate_texts: Vec<String>,
    pub duplicate_embeddings: Vec<Embedding>,
}

/// Embeds each parsed chunk and inserts it into the replica under the
/// alpha1 guard; shared verbatim by the adaptive and static attackers.
pub fn dedup_into_replica(
    parsed: &[String],
    stolen: &mut StolenKnowledgeBase,
    embedder: &dyn Embedder,
    step: u64,
) -> Result<DedupSplit, EngineError> {
    let mut split = DedupSplit {
        fresh_texts: Vec::new(),
        fresh_chunks: Vec::new(),
        duplicate_texts: Vec::new(),
        duplicate_embeddings: Vec::new(),
    };
    for text in parsed {
        let embedding = embedder.embed(text)?;
        match stolen.insert(text, embedding.clone(), step)? {
            InsertOutcome::Inserted(idx) => {
                split.fresh_texts.push(text.clone());
                split.fresh_chunks.push(stolen.chunks()[idx].clone());
            }
            InsertOutcome::Duplicate { .. } => {
                split.duplicate_texts.push(text.clone());
                split.duplicate_embeddings.push(embedding);
            }
        }
    }
    Ok(split)
}

/// Everything observed in one attack iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AttackStepRecord {
    pub step: u64,
    pub sampled_anchor_texts: Vec<String>,
    pub base_query: String,
    pub commands_attempted: Vec<u32>,
    pub command_id: Option<u32>,
    pub poisoned_query: String,
    pub raw_response: String,
    pub parsed_chunks: Vec<String>,
    pub fresh_chunks: Vec<String>,
    pub duplicate_chunks: Vec<String>,
    pub new_anchor_texts: Vec<String>,
    pub penalties: BTreeMap<String, f64>,
    pub relevance_max: f64,
    pub relevance_count_zero: usize,
    pub relevance_count_total: usize,
    pub gen_time_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    RelevanceExhausted,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    pub rules: ParsingRules,
    pub command_id: u32,
    pub queries_sent: u64,
}

/// Probes the target with the fixed opening question plus each pool
/// command until a response exposes a parseable line structure.
pub fn bootstrap(
    target: &mut dyn AttackTarget,
    command_pool: &[String],
) -> Result<BootstrapOutcome, EngineError> {
    let mut queries_sent = 0;
    for (idx, command) in command_pool.iter().enumerate() {
        let query = inject(BOOTSTRAP_QUERY, command)?;
        let response = chat_with_retry(target, &query)?;
        queries_sent += 1;
        if let Some(rules) = infer_rules(&response) {
            return Ok(BootstrapOutcome {
                rules,
                command_id: idx as u32 + 1,
                queries_sent,
            });
        }
    }
    Err(EngineError::Bootstrap(format!(
        "no injection command elicited parseable structure after {queries_sent} probes"
    )))
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub records: Vec<AttackStepRecord>,
    pub stop_reason: StopReason,
    pub bootstrap_queries: u64,
}

/// The attack state machine. Strictly sequential; one instance per run.
pub struct ExtractionEngine {
    config: EngineConfig,
    gateway: LlmGateway,
    embedder: Box<dyn Embedder>,
    ledger: AnchorLedger,
    stolen: StolenKnowledgeBase,
    rng: ChaCha8Rng,
    step: u64,
    carried_extraction_secs: f64,
}

impl ExtractionEngine {
    pub fn new(
        config: EngineConfig,
        gateway: LlmGateway,
        embedder: Box<dyn Embedder>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let gateway = gateway.with_max_anchors_per_chunk(config.max_anchors_per_chunk);
        let mut ledger = AnchorLedger::new(config.alpha2);
        let seed_embedding = embedder.embed(&config.initial_anchor)?;
        let seed_anchor = Anchor::new(&config.initial_anchor, seed_embedding, 0)?;
        ledger.match_or_insert(seed_anchor, f64::from(config.beta))?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let stolen = StolenKnowledgeBase::new(config.alpha1);
        Ok(Self {
            config,
            gateway,
            embedder,
            ledger,
            stolen,
            rng,
            step: 0,
            carried_extraction_secs: 0.0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn ledger(&self) -> &AnchorLedger {
        &self.ledger
    }

    pub fn stolen(&self) -> &StolenKnowledgeBase {
        &self.stolen
    }

    /// Sends the fixed opening question with each pool command until a
    /// response exposes a parseable line structure, then freezes parsing
    /// rules and the estimated per-response chunk count.
    pub fn bootstrap(
        &mut self,
        target: &mut dyn AttackTarget,
    ) -> Result<BootstrapOutcome, EngineError> {
        bootstrap(target, &self.config.command_pool)
    }

    fn base_query_for(&self, sampled: &[Anchor]) -> Result<String, EngineError> {
        for _ in 0..2 {
            match self.gateway.generate_base_query(sampled) {
                Ok(q) if !q.trim().is_empty() => return Ok(q),
                Ok(_) | Err(LlmError::EmptyGeneration) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(format!("Tell me about {}.", crate::llm::join_topic_list(sampled)))
    }

    /// One full attack iteration against the target. Commands are tried in
    /// pool order until something parses; a step that exhausts the pool
    /// still consumes budget and strikes the sampled anchors.
    pub fn attack_once(
        &mut self,
        target: &mut dyn AttackTarget,
        rules: &ParsingRules,
    ) -> Result<AttackStepRecord, EngineError> {
        if self.ledger.max_relevance() <= 0.0 {
            return Err(EngineError::Contract(
                "attack_once called after the stop condition".to_string(),
            ));
        }
        self.step += 1;
        let step = self.step;

        // Craft the poisoned query (the timed portion).
        let craft_start = Instant::now();
        let sampled_indices =
            sample_anchors(&self.ledger, self.config.anchors_per_query, &mut self.rng)?;
        let sampled: Vec<Anchor> = sampled_indices
            .iter()
            .map(|&i| self.ledger.anchor(i).clone())
            .collect();
        let base_query = self.base_query_for(&sampled)?;
        let craft_secs = craft_start.elapsed().as_secs_f64();

        // Inner loop and replica dedup: the code paths shared with the
        // static attacker.
        let round =
            execute_injection_round(&base_query, target, rules, &self.config.command_pool)?;
        let split = dedup_into_replica(
            &round.parsed,
            &mut self.stolen,
            self.embedder.as_ref(),
            step,
        )?;

        // Anchor extraction (charged to the next step's craft time).
        let extraction_start = Instant::now();
        let candidate_new = if split.fresh_chunks.is_empty() {
            Vec::new()
        } else {
            self.gateway.extract_anchors(&split.fresh_chunks)?
        };
        let dup_anchor_texts = if split.duplicate_texts.is_empty() {
            Vec::new()
        } else {
            let dup_chunks: Vec<Chunk> = split
                .duplicate_texts
                .iter()
                .enumerate()
                .map(|(i, t)| Chunk::new(format!("dup-{step}-{i}"), t, ChunkSource::Stolen, step))
                .collect::<Result<_, _>>()?;
            self.gateway.extract_anchors(&dup_chunks)?
        };
        let extraction_secs = extraction_start.elapsed().as_secs_f64();

        // Penalties over the pre-update ledger.
        let penalties = if split.duplicate_embeddings.is_empty() {
            Vec::new()
        } else {
            compute_penalties(&split.duplicate_embeddings, &self.ledger)?
        };

        // New anchors, deduplicated against the ledger and each other.
        let accepted_new = self.dedup_candidates(&candidate_new, step)?;
        let new_anchor_texts: Vec<String> = accepted_new.iter().map(|a| a.text.clone()).collect();

        let hits = identify_dupe_anchor_hits(
            &self.ledger,
            &accepted_new,
            &dup_anchor_texts,
            self.embedder.as_ref(),
        )?;

        let mut applied: BTreeMap<String, f64> = hits
            .iter()
            .map(|&i| {
                (
                    self.ledger.anchor(i).text.clone(),
                    penalties.get(i).copied().unwrap_or(0.0),
                )
            })
            .collect();
        update_relevances(&mut self.ledger, accepted_new, &hits, &penalties)?;

        // Pool exhausted with nothing parsed: the sampled anchors take a
        // full strike so a target that never yields cannot stall an
        // unbounded run.
        if round.parsed.is_empty() {
            for &idx in &sampled_indices {
                self.ledger.penalize(idx, 1.0);
                applied.insert(self.ledger.anchor(idx).text.clone(), 1.0);
            }
        }

        let gen_time_seconds = match self.config.timing {
            TimingMode::Fixed => 0.0,
            TimingMode::Wall => {
                if self.config.charge_extraction_to_next_step {
                    let carried = self.carried_extraction_secs;
                    self.carried_extraction_secs = extraction_secs;
                    craft_secs + carried
                } else {
                    craft_secs + extraction_secs
                }
            }
        };

        Ok(AttackStepRecord {
            step,
            sampled_anchor_texts: sampled.iter().map(|a| a.text.clone()).collect(),
            base_query,
            commands_attempted: round.commands_attempted,
            command_id: round.command_id,
            poisoned_query: round.poisoned_query,
            raw_response: round.raw_response,
            parsed_chunks: round.parsed,
            fresh_chunks: split.fresh_texts,
            duplicate_chunks: split.duplicate_texts,
            new_anchor_texts,
            penalties: applied,
            relevance_max: self.ledger.max_relevance(),
            relevance_count_zero: self.ledger.count_zero(),
            relevance_count_total: self.ledger.len(),
            gen_time_seconds,
        })
    }

    fn dedup_candidates(
        &self,
        candidates: &[String],
        step: u64,
    ) -> Result<Vec<Anchor>, EngineError> {
        let mut accepted: Vec<Anchor> = Vec::new();
        for text in candidates {
            let embedding = self.embedder.embed(text)?;
            let anchor = match Anchor::new(text, embedding, step) {
                Ok(a) => a,
                Err(_) => continue,
            };
            let vs_ledger = self
                .ledger
                .nearest(&anchor.embedding)?
                .map(|(_, s)| s)
                .unwrap_or(f64::NEG_INFINITY);
            let vs_accepted = accepted
                .iter()
                .map(|a| cosine_sim(&anchor.embedding, &a.embedding))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if vs_ledger < self.config.alpha2 && vs_accepted < self.config.alpha2 {
                accepted.push(anchor);
            }
        }
        Ok(accepted)
    }

    /// Bootstraps, then attacks until relevance dies out (or the bounded
    /// budget is spent).
    pub fn run(&mut self, target: &mut dyn AttackTarget) -> Result<AttackOutcome, EngineError> {
        let boot = self.bootstrap(target)?;
        self.run_with_rules(target, &boot.rules, boot.queries_sent)
    }

    /// The attack loop with externally supplied parsing rules.
    pub fn run_with_rules(
        &mut self,
        target: &mut dyn AttackTarget,
        rules: &ParsingRules,
        bootstrap_queries: u64,
    ) -> Result<AttackOutcome, EngineError> {
        let mut records = Vec::new();
        let stop_reason = loop {
            if self.ledger.max_relevance() <= 0.0 {
                break StopReason::RelevanceExhausted;
            }
            if let RunMode::Bounded { max_attacks } = self.config.mode {
                if records.len() as u64 >= max_attacks {
                    break StopReason::BudgetExhausted;
                }
            }
            records.push(self.attack_once(target, rules)?);
        };
        Ok(AttackOutcome {
            records,
            stop_reason,
            bootstrap_queries,
        })
    }
}
