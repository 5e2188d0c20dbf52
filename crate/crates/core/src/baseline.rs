//! A static-query-pool attacker for comparison runs: cyclic pre-designed
//! queries through the exact injection/parse/dedup machinery the adaptive
//! engine uses, with no anchor or relevance state.

use std::path::Path;
use std::time::Instant;

use crate::embed::Embedder;
use crate::engine::{
    dedup_into_replica, execute_injection_round, AttackOutcome, AttackStepRecord, EngineConfig,
    EngineError, ParsingRules, RunMode, StopReason, TimingMode,
};
use crate::knowledge::StolenKnowledgeBase;
use crate::target::AttackTarget;

/// The shipped general-knowledge query pool (one query per line).
pub static DEFAULT_QUERY_POOL: &str = include_str!("assets/static_queries.txt");

/// An ordered query list with a cyclic cursor.
#[derive(Debug, Clone)]
pub struct QueryPool {
    queries: Vec<String>,
    cursor: usize,
}

impl QueryPool {
    pub fn new(queries: Vec<String>) -> Result<Self, EngineError> {
        let queries: Vec<String> = queries
            .into_iter()
            .map(|q| q.trim().to_string())
            .filter(|q| !q.is_empty())
            .collect();
        if queries.is_empty() {
            return Err(EngineError::Contract(
                "query pool must contain at least one nonempty query".to_string(),
            ));
        }
        Ok(Self { queries, cursor: 0 })
    }

    /// Parses a plain-text pool file, one UTF-8 query per line.
    pub fn from_file(path: &Path) -> Result<Self, EngineError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            EngineError::Contract(format!("cannot read query pool {}: {e}", path.display()))
        })?;
        Self::new(raw.lines().map(str::to_string).collect())
    }

    /// The bundled pool, optionally truncated.
    pub fn bundled(limit: Option<usize>) -> Self {
        let mut queries: Vec<String> = DEFAULT_QUERY_POOL
            .lines()
            .map(str::to_string)
            .filter(|q| !q.trim().is_empty())
            .collect();
        if let Some(n) = limit {
            queries.truncate(n.max(1));
        }
        Self::new(queries).expect("bundled pool is nonempty")
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[String] {
        &self.queries
    }

    /// Returns the query under the cursor and advances cyclically.
    pub fn next_query(&mut self) -> String {
        let q = self.queries[self.cursor].clone();
        self.cursor = (self.cursor + 1) % self.queries.len();
        q
    }
}

/// The static attacker: pool order decides the queries, everything
/// downstream of query construction is the engine's code.
pub struct StaticAttacker {
    config: EngineConfig,
    pool: QueryPool,
    embedder: Box<dyn Embedder>,
    stolen: StolenKnowledgeBase,
    step: u64,
}

impl StaticAttacker {
    pub fn new(
        config: EngineConfig,
        pool: QueryPool,
        embedder: Box<dyn Embedder>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        if matches!(config.mode, RunMode::Unbounded) {
            return Err(EngineError::Contract(
                "a static pool has no stop condition of its own; use a bounded mode".to_string(),
            ));
        }
        let stolen = StolenKnowledgeBase::new(config.alpha1);
        Ok(Self {
            config,
            pool,
            embedder,
            stolen,
            step: 0,
        })
    }

    pub fn stolen(&self) -> &StolenKnowledgeBase {
        &self.stolen
    }

    /// One static attack step: next pool query through the shared
    /// injection round and replica dedup.
    pub fn attack_once(
        &mut self,
        target: &mut dyn AttackTarget,
        rules: &ParsingRules,
    ) -> Result<AttackStepRecord, EngineError> {
        self.step += 1;
        let step = self.step;
        let craft_start = Instant::now();
        let base_query = self.pool.next_query();
        let craft_secs = craft_start.elapsed().as_secs_f64();

        let round =
            execute_injection_round(&base_query, target, rules, &self.config.command_pool)?;
        let split = dedup_into_replica(
            &round.parsed,
            &mut self.stolen,
            self.embedder.as_ref(),
            step,
        )?;

        Ok(AttackStepRecord {
            step,
            sampled_anchor_texts: Vec::new(),
            base_query,
            commands_attempted: round.commands_attempted,
            command_id: round.command_id,
            poisoned_query: round.poisoned_query,
            raw_response: round.raw_response,
            parsed_chunks: round.parsed,
            fresh_chunks: split.fresh_texts,
            duplicate_chunks: split.duplicate_texts,
            new_anchor_texts: Vec::new(),
            penalties: std::collections::BTreeMap::new(),
            relevance_max: 0.0,
            relevance_count_zero: 0,
            relevance_count_total: 0,
            gen_time_seconds: match self.config.timing {
                TimingMode::Fixed => 0.0,
                TimingMode::Wall => craft_secs,
            },
        })
    }

    /// Runs the bounded budget to completion.
    pub fn run_with_rules(
        &mut self,
        target: &mut dyn AttackTarget,
        rules: &ParsingRules,
        bootstrap_queries: u64,
    ) -> Result<AttackOutcome, EngineError> {
        let RunMode::Bounded { max_attacks } = self.config.mode else {
            unreachable!("constructor rejects unbounded mode");
        };
        let mut records = Vec::new();
        for _ in 0..max_attacks {
            records.push(self.attack_once(target, rules)?);
        }
        Ok(AttackOutcome {
            records,
            stop_reason: StopReason::BudgetExhausted,
            bootstrap_queries,
        })
    }
}
