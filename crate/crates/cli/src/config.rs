//! TOML run-configuration file: a single structured document covering the
//! attacker (engine, embedder, LLM) and, for in-process runs and served
//! targets, the agent. Every field has the standard default, so a minimal
//! config only names the knowledge base.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ragleak_core::artifacts::{AttackRunSpec, AttackerKind, TargetSpec};
use ragleak_core::embed::{EmbedderSpec, DEFAULT_DIM};
use ragleak_core::engine::{EngineConfig, RunMode, TimingMode};
use ragleak_core::llm::LlmSpec;
use ragleak_core::simulator::{
    AgentConfig, ComplianceModel, GuardFilter, DEFAULT_TARGET_EMBED_SEED,
};
use ragleak_core::wire::WireSettings;

pub const DEFAULT_ATTACKER_EMBED_SEED: u64 = 1001;
pub const DEFAULT_ATTACKER_LLM_SEED: u64 = 2002;

/// A config error with enough context to act on.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub attacker: AttackerSection,
    #[serde(default)]
    pub target: Option<TargetSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub max_attacks: Option<u64>,
    pub attacker: Option<String>,
    pub timing: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: None,
            mode: None,
            max_attacks: None,
            attacker: None,
            timing: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub beta: Option<u32>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub anchors_per_query: Option<usize>,
    pub initial_anchor: Option<String>,
    pub max_anchors_per_chunk: Option<usize>,
    pub command_pool: Option<Vec<String>>,
    pub charge_extraction_to_next_step: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerSection {
    #[serde(default)]
    pub embedder: Option<EmbedderSection>,
    #[serde(default)]
    pub llm: Option<LlmSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSection {
    pub kind: Option<String>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub kb_path: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub embedder: Option<EmbedderSection>,
    #[serde(default)]
    pub compliance: Option<ComplianceSection>,
    #[serde(default)]
    pub guard: Option<GuardSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceSection {
    /// Obedience probability per command, in pool order.
    pub obey_prob: Option<Vec<f64>>,
    pub noise_rate: Option<f64>,
    pub max_chunks_emitted: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardSection {
    pub reject_substrings: Vec<String>,
    pub refusal: String,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&raw).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn parse_mode(value: &str) -> Result<RunMode, ConfigError> {
    match value {
        "unbounded" => Ok(RunMode::Unbounded),
        "bounded" => Ok(RunMode::Bounded {
            max_attacks: ragleak_core::engine::DEFAULT_MAX_ATTACKS,
        }),
        other => {
            if let Some(n) = other.strip_prefix("bounded:") {
                let max_attacks: u64 = n.parse().map_err(|_| {
                    ConfigError(format!("field `run.mode`: bad attack budget in {other:?}"))
                })?;
                if max_attacks == 0 {
                    return Err(ConfigError(
                        "field `run.mode`: attack budget must be positive".to_string(),
                    ));
                }
                Ok(RunMode::Bounded { max_attacks })
            } else {
                Err(ConfigError(format!(
                    "field `run.mode`: expected \"bounded[:N]\" or \"unbounded\", got {other:?}"
                )))
            }
        }
    }
}

pub fn parse_mode_flag(value: &str) -> Result<RunMode, ConfigError> {
    parse_mode(value)
}

fn embedder_from(section: Option<&EmbedderSection>, default_seed: u64) -> Result<EmbedderSpec, ConfigError> {
    let Some(section) = section else {
        return Ok(EmbedderSpec::deterministic(DEFAULT_DIM, default_seed));
    };
    let kind = section.kind.as_deref().unwrap_or("deterministic-ngram");
    match kind {
        "deterministic-ngram" => Ok(EmbedderSpec::DeterministicNgram {
            dim: section.dim.unwrap_or(DEFAULT_DIM),
            seed: section.seed.unwrap_or(default_seed),
        }),
        "remote" => {
            let endpoint = section.endpoint.clone().ok_or_else(|| {
                ConfigError("field `embedder.endpoint`: required for kind \"remote\"".to_string())
            })?;
            let model_name = section.model_name.clone().ok_or_else(|| {
                ConfigError("field `embedder.model_name`: required for kind \"remote\"".to_string())
            })?;
            Ok(EmbedderSpec::Remote {
                endpoint,
                model_name,
                dim: section.dim.unwrap_or(DEFAULT_DIM),
                wire: wire_settings(section.timeout_ms, section.retries),
            })
        }
        other => Err(ConfigError(format!(
            "field `embedder.kind`: unknown kind {other:?}"
        ))),
    }
}

fn wire_settings(timeout_ms: Option<u64>, retries: Option<u32>) -> Option<WireSettings> {
    if timeout_ms.is_none() && retries.is_none() {
        return None;
    }
    let defaults = WireSettings::default();
    Some(WireSettings {
        timeout_ms: timeout_ms.unwrap_or(defaults.timeout_ms),
        retries: retries.unwrap_or(defaults.retries),
        backoff_base_ms: defaults.backoff_base_ms,
    })
}

fn llm_from(section: Option<&LlmSection>) -> Result<LlmSpec, ConfigError> {
    let Some(section) = section else {
        return Ok(LlmSpec::Mock {
            seed: DEFAULT_ATTACKER_LLM_SEED,
        });
    };
    let kind = section.kind.as_deref().unwrap_or("mock");
    match kind {
        "mock" => Ok(LlmSpec::Mock {
            seed: section.seed.unwrap_or(DEFAULT_ATTACKER_LLM_SEED),
        }),
        "remote" => {
            let endpoint = section.endpoint.clone().ok_or_else(|| {
                ConfigError("field `llm.endpoint`: required for kind \"remote\"".to_string())
            })?;
            let model_name = section.model_name.clone().ok_or_else(|| {
                ConfigError("field `llm.model_name`: required for kind \"remote\"".to_string())
            })?;
            Ok(LlmSpec::Remote {
                endpoint,
                model_name,
                temperature: section
                    .temperature
                    .unwrap_or(ragleak_core::llm::DEFAULT_REMOTE_TEMPERATURE),
                max_tokens: section
                    .max_tokens
                    .unwrap_or(ragleak_core::llm::DEFAULT_MAX_TOKENS),
                wire: wire_settings(section.timeout_ms, section.retries),
            })
        }
        other => Err(ConfigError(format!("field `llm.kind`: unknown kind {other:?}"))),
    }
}

/// Builds the agent config from the `[target]` section. `config_dir`
/// resolves a relative kb_path.
pub fn agent_from(section: &TargetSection, config_dir: &Path) -> Result<AgentConfig, ConfigError> {
    let mut agent = AgentConfig::default();
    if let Some(kb) = &section.kb_path {
        agent.kb_path = Some(if kb.is_relative() {
            config_dir.join(kb)
        } else {
            kb.clone()
        });
    }
    if let Some(k) = section.top_k {
        agent.top_k = k;
    }
    if let Some(t) = section.temperature {
        agent.temperature = t;
    }
    if let Some(s) = section.seed {
        agent.seed = s;
    }
    agent.embedder = embedder_from(section.embedder.as_ref(), DEFAULT_TARGET_EMBED_SEED)?;
    if let Some(c) = &section.compliance {
        let mut compliance = ComplianceModel::default();
        if let Some(probs) = &c.obey_prob {
            let mut map = BTreeMap::new();
            for (i, p) in probs.iter().enumerate() {
                map.insert(i as u32 + 1, *p);
            }
            compliance.per_command_obey_prob = map;
        }
        if let Some(n) = c.noise_rate {
            compliance.noise_rate = n;
        }
        if let Some(m) = c.max_chunks_emitted {
            compliance.max_chunks_emitted = m;
        }
        agent.compliance = compliance;
    }
    if let Some(g) = &section.guard {
        agent.guard = Some(GuardFilter {
            reject_substrings: g.reject_substrings.clone(),
            refusal: g.refusal.clone(),
        });
    }
    agent
        .validate()
        .map_err(|e| ConfigError(e.to_string()))?;
    Ok(agent)
}

/// Documented environment overrides (applied between config and flags).
pub fn apply_env_overrides(config: &mut FileConfig) -> Result<(), ConfigError> {
    if let Ok(v) = std::env::var("RAGLEAK_SEED") {
        config.run.seed = Some(v.parse().map_err(|_| {
            ConfigError(format!("env RAGLEAK_SEED: expected an integer, got {v:?}"))
        })?);
    }
    if let Ok(v) = std::env::var("RAGLEAK_MODE") {
        parse_mode(&v)?;
        config.run.mode = Some(v);
    }
    Ok(())
}

pub struct BuildInputs<'a> {
    pub config: &'a FileConfig,
    pub config_dir: &'a Path,
    pub mode_flag: Option<RunMode>,
    pub attacker_flag: Option<AttackerKind>,
    pub target_url: Option<String>,
    pub pool_queries: Option<Vec<String>>,
}

/// Assembles the full run spec from config + flags (flags win).
pub fn build_run_spec(inputs: BuildInputs<'_>) -> Result<AttackRunSpec, ConfigError> {
    let config = inputs.config;
    let mut engine = EngineConfig::default();
    if let Some(b) = config.engine.beta {
        engine.beta = b;
    }
    if let Some(a) = config.engine.alpha1 {
        engine.alpha1 = a;
    }
    if let Some(a) = config.engine.alpha2 {
        engine.alpha2 = a;
    }
    if let Some(n) = config.engine.anchors_per_query {
        engine.anchors_per_query = n;
    }
    if let Some(a) = &config.engine.initial_anchor {
        engine.initial_anchor = a.clone();
    }
    if let Some(m) = config.engine.max_anchors_per_chunk {
        engine.max_anchors_per_chunk = m;
    }
    if let Some(pool) = &config.engine.command_pool {
        engine.command_pool = pool.clone();
    }
    if let Some(c) = config.engine.charge_extraction_to_next_step {
        engine.charge_extraction_to_next_step = c;
    }
    if let Some(s) = config.run.seed {
        engine.seed = s;
    }
    engine.mode = match (inputs.mode_flag, &config.run.mode) {
        (Some(flag), _) => flag,
        (None, Some(text)) => parse_mode(text)?,
        (None, None) => RunMode::Bounded {
            max_attacks: config
                .run
                .max_attacks
                .unwrap_or(ragleak_core::engine::DEFAULT_MAX_ATTACKS),
        },
    };
    if let (RunMode::Bounded { .. }, Some(n), None) =
        (engine.mode, config.run.max_attacks, inputs.mode_flag.as_ref())
    {
        engine.mode = RunMode::Bounded { max_attacks: n };
    }
    engine.timing = match config.run.timing.as_deref() {
        Some("wall") => TimingMode::Wall,
        Some("fixed") | None => TimingMode::Fixed,
        Some(other) => {
            return Err(ConfigError(format!(
                "field `run.timing`: expected \"fixed\" or \"wall\", got {other:?}"
            )))
        }
    };
    engine
        .validate()
        .map_err(|e| ConfigError(e.to_string()))?;

    let attacker = match (inputs.attacker_flag, config.run.attacker.as_deref()) {
        (Some(kind), _) => kind,
        (None, Some("adaptive") | None) => AttackerKind::Adaptive,
        (None, Some("static")) => AttackerKind::Static,
        (None, Some(other)) => {
            return Err(ConfigError(format!(
                "field `run.attacker`: expected \"adaptive\" or \"static\", got {other:?}"
            )))
        }
    };

    let target = match (&inputs.target_url, &config.target) {
        (Some(url), _) => TargetSpec::Http {
            url: url.clone(),
            wire: None,
        },
        (None, Some(section)) => TargetSpec::InProcess {
            agent: agent_from(section, inputs.config_dir)?,
        },
        (None, None) => {
            return Err(ConfigError(
                "no target: pass --target-url or add a [target] section".to_string(),
            ))
        }
    };

    let static_pool = match attacker {
        AttackerKind::Static => Some(match inputs.pool_queries {
            Some(q) => q,
            None => ragleak_core::baseline::QueryPool::bundled(None)
                .queries()
                .to_vec(),
        }),
        AttackerKind::Adaptive => None,
    };

    Ok(AttackRunSpec {
        attacker,
        engine,
        attacker_embedder: embedder_from(
            config.attacker.embedder.as_ref(),
            DEFAULT_ATTACKER_EMBED_SEED,
        )?,
        attacker_llm: llm_from(config.attacker.llm.as_ref())?,
        target,
        static_pool,
    })
}
