//! Operator entry point: serve simulated RAG targets, run extraction
//! attacks (adaptive or static baseline), score finished runs, and
//! generate synthetic knowledge bases.
//!
//! Exit codes: 0 success, 2 invalid config/usage, 3 busy port,
//! 4 bootstrap failure, 5 transport failure, 6 missing artifacts.

mod config;

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ragleak_core::artifacts::{
    execute_attack, execute_from_manifest, generate_synthetic_kb, load_manifest, score_run,
    write_kb_jsonl, ArtifactError, AttackerKind, InstrumentationSource,
};
use ragleak_core::engine::EngineError;
use ragleak_core::simulator::{serve, ServeError, TargetAgent};
use ragleak_core::target::TargetError;

use config::{
    agent_from, apply_env_overrides, build_run_spec, load_file_config, parse_mode_flag,
    BuildInputs, ConfigError,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_PORT: u8 = 3;
const EXIT_BOOTSTRAP: u8 = 4;
const EXIT_TRANSPORT: u8 = 5;
const EXIT_MISSING: u8 = 6;

#[derive(Parser)]
#[command(name = "ragleak", version, about = "RAG knowledge-base extraction harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the simulated RAG target as an OpenAI-compatible chat service.
    ServeTarget(ServeTargetArgs),
    /// Run an extraction attack and write a run directory.
    Attack(AttackArgs),
    /// Score a finished run directory (report.json, curves.csv).
    Score(ScoreArgs),
    /// Generate a synthetic knowledge base (JSONL).
    GenKb(GenKbArgs),
}

#[derive(Args)]
struct ServeTargetArgs {
    /// Run configuration file (TOML) with a [target] section.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Require this token on GET /instrumentation.
    #[arg(long)]
    admin_token: Option<String>,
}

#[derive(Args)]
struct AttackArgs {
    /// Run configuration file (TOML).
    #[arg(long, required_unless_present = "from_manifest")]
    config: Option<PathBuf>,
    /// Reproduce a previous run from its manifest.json.
    #[arg(long, conflicts_with_all = ["config", "target_url", "mode", "attacker", "pool"])]
    from_manifest: Option<PathBuf>,
    /// Attack a remote chat endpoint instead of the configured [target].
    #[arg(long, conflicts_with = "in_process")]
    target_url: Option<String>,
    /// Attack the [target] section in-process (the default when present).
    #[arg(long)]
    in_process: bool,
    /// "bounded[:N]" or "unbounded" (default bounded:300).
    #[arg(long)]
    mode: Option<String>,
    /// "adaptive" (default) or "static".
    #[arg(long)]
    attacker: Option<String>,
    /// Query pool file for the static attacker (one query per line).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Run directory produced by `attack`.
    #[arg(long)]
    run: PathBuf,
    /// Ground-truth knowledge base (JSONL) for LK.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Instrumentation source: a file path or an http(s) URL. Defaults to
    /// the run directory's own snapshot when present.
    #[arg(long)]
    instrumentation: Option<String>,
    /// Admin token for an instrumentation URL.
    #[arg(long)]
    admin_token: Option<String>,
}

#[derive(Args)]
struct GenKbArgs {
    #[arg(long)]
    chunks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<ArtifactError> for Failure {
    fn from(e: ArtifactError) -> Self {
        let code = match &e {
            ArtifactError::Engine(EngineError::Bootstrap(_)) => EXIT_BOOTSTRAP,
            ArtifactError::Engine(EngineError::Target(TargetError::Transport(_))) => {
                EXIT_TRANSPORT
            }
            ArtifactError::Wire(_) => EXIT_TRANSPORT,
            ArtifactError::Missing(_) => EXIT_MISSING,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ServeTarget(args) => cmd_serve_target(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Score(args) => cmd_score(args),
        Command::GenKb(args) => cmd_gen_kb(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_serve_target(args: ServeTargetArgs) -> Result<(), Failure> {
    let file = load_file_config(&args.config)?;
    let config_dir = args
        .config
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let section = file.target.as_ref().ok_or_else(|| {
        Failure::config(format!(
            "{}: missing [target] section",
            args.config.display()
        ))
    })?;
    let agent_config = agent_from(section, &config_dir)?;
    if agent_config.kb_path.is_none() {
        return Err(Failure::config("field `target.kb_path`: required to serve"));
    }
    let agent = TargetAgent::from_config(agent_config).map_err(|e| Failure::config(e.to_string()))?;
    let bind = SocketAddr::new(args.bind, args.port);
    let handle = serve(agent, bind, args.admin_token).map_err(|e| match e {
        ServeError::Bind { .. } => Failure {
            code: EXIT_PORT,
            message: e.to_string(),
        },
        other => Failure::config(other.to_string()),
    })?;
    println!("serving target at {}", handle.endpoint());
    println!("chat endpoint:     POST {}/v1/chat/completions", handle.endpoint());
    println!("instrumentation:   GET  {}/instrumentation", handle.endpoint());
    loop {
        std::thread::park();
    }
}

fn cmd_attack(args: AttackArgs) -> Result<(), Failure> {
    let executed = if let Some(manifest_path) = &args.from_manifest {
        let run_dir = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        let manifest = if manifest_path.is_dir() {
            load_manifest(manifest_path)?
        } else {
            load_manifest(&run_dir)?
        };
        execute_from_manifest(&manifest, &args.out)?
    } else {
        let config_path = args.config.as_ref().expect("clap enforces presence");
        let mut file = load_file_config(config_path)?;
        apply_env_overrides(&mut file)?;
        let config_dir = config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();

        let mode_flag = match &args.mode {
            Some(m) => Some(parse_mode_flag(m)?),
            None => None,
        };
        let attacker_flag = match args.attacker.as_deref() {
            Some("adaptive") => Some(AttackerKind::Adaptive),
            Some("static") => Some(AttackerKind::Static),
            Some(other) => {
                return Err(Failure::config(format!(
                    "--attacker: expected \"adaptive\" or \"static\", got {other:?}"
                )))
            }
            None => None,
        };
        let pool_queries = match &args.pool {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| {
                    Failure::config(format!("cannot read pool {}: {e}", path.display()))
                })?;
                Some(raw.lines().map(str::to_string).collect())
            }
            None => None,
        };
        let target_url = args
            .target_url
            .clone()
            .or_else(|| std::env::var("RAGLEAK_TARGET_URL").ok());

        let spec = build_run_spec(BuildInputs {
            config: &file,
            config_dir: &config_dir,
            mode_flag,
            attacker_flag,
            target_url,
            pool_queries,
        })?;
        execute_attack(&spec, &args.out)?
    };

    println!(
        "run complete: {} attacks, stop reason {:?}, {} stolen chunks",
        executed.outcome.records.len(),
        executed.manifest.stop_reason,
        executed.stolen.len()
    );
    println!("run directory: {}", executed.dir.display());
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), Failure> {
    let source = match &args.instrumentation {
        None => InstrumentationSource::Auto,
        Some(s) if s.starts_with("http://") || s.starts_with("https://") => {
            InstrumentationSource::Url {
                url: s.clone(),
                admin_token: args.admin_token.clone(),
            }
        }
        Some(s) => InstrumentationSource::File(PathBuf::from(s)),
    };
    let report = score_run(&args.run, args.truth.as_deref(), source)?;
    println!("{}", report.table_row());
    println!(
        "report: {}",
        args.run.join(ragleak_core::artifacts::REPORT_FILE).display()
    );
    Ok(())
}

fn cmd_gen_kb(args: GenKbArgs) -> Result<(), Failure> {
    if args.chunks == 0 {
        return Err(Failure::config("--chunks must be positive"));
    }
    let entries = generate_synthetic_kb(args.chunks, args.seed);
    write_kb_jsonl(&args.out, &entries)?;
    println!("wrote {} chunks to {}", entries.len(), args.out.display());
    Ok(())
}
