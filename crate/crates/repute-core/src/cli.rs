//! The `repute` command line: compute reputations from a rating log, run
//! scoped schedules, simulate societies with consensus, replay scripted
//! consensus rounds, and compare linear vs logarithmic reputation
//! distributions.
//!
//! Every run writes its artifacts plus a `manifest.json` recording the
//! effective configuration and the SHA-256 digest of each input and output,
//! so identical inputs are provably reproducible byte for byte. Exit codes:
//! 0 success, 1 validation failure (nothing written), 2 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{
    credit_miners, AgencyId, ConsensusRound, MiningLedger, StateSubmission, TranscriptEvent,
    Verdict,
};
use crate::engine::compute_period;
use crate::model::{EngineConfig, ReputationState, StateDigest, Timestamp};
use crate::scoping::{run_schedule, ScopingPolicy};
use crate::simnet::{compare_linear_vs_log, run_scenario, ScenarioSpec, SimSettings};
use crate::storage::{ingest_path, write_rating_log, LogFormat, SnapshotDoc};

#[derive(Parser)]
#[command(
    name = "repute",
    version,
    about = "Reputation engine, consensus and society simulator"
)]
struct Cli {
    /// Output directory (defaults to $REPUTE_OUT or ./repute-out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Configuration file (JSON; flags override file values)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct EngineFlags {
    #[arg(long)]
    default_reputation: Option<f64>,
    #[arg(long)]
    endorse_blend: Option<f64>,
    #[arg(long)]
    transact_blend: Option<f64>,
    /// true/false
    #[arg(long)]
    use_log_differential: Option<bool>,
    #[arg(long)]
    decay_prev: Option<f64>,
    #[arg(long)]
    decay_new: Option<f64>,
    #[arg(long)]
    rater_weight_floor: Option<f64>,
    /// true/false
    #[arg(long)]
    financial_log_normalize: Option<bool>,
    #[arg(long)]
    hash_precision: Option<u8>,
    /// true/false: hold silent members instead of decaying them
    #[arg(long)]
    no_evidence_hold: Option<bool>,
}

impl EngineFlags {
    fn apply(&self, config: &mut EngineConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    config.$field = v;
                }
            };
        }
        set!(default_reputation);
        set!(endorse_blend);
        set!(transact_blend);
        set!(use_log_differential);
        set!(decay_prev);
        set!(decay_new);
        set!(rater_weight_floor);
        set!(financial_log_normalize);
        set!(hash_precision);
        set!(no_evidence_hold);
    }
}

#[derive(Args, Default, Clone)]
struct ScopingFlags {
    /// lifetime | incremental | up-to-date | blocked-incremental
    #[arg(long)]
    mode: Option<String>,
    /// Window width in ticks (up-to-date mode)
    #[arg(long)]
    window: Option<u64>,
    /// Transactions per block (blocked-incremental mode)
    #[arg(long)]
    block_size: Option<usize>,
    /// Recency half-life in ticks (lifetime mode)
    #[arg(long)]
    half_life: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the final reputation state from a rating log in one batch
    Compute {
        #[arg(long)]
        ratings: PathBuf,
        /// jsonl | csv (default: by file extension)
        #[arg(long)]
        format: Option<String>,
        /// Accumulation origin tick
        #[arg(long)]
        origin: Option<u64>,
        /// Period end tick (default: last record time)
        #[arg(long)]
        as_of: Option<u64>,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Fold the engine over a rating log under a temporal scoping policy
    Schedule {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        origin: Option<u64>,
        #[command(flatten)]
        scoping: ScopingFlags,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Generate a society from a scenario, run engine + consensus, report metrics
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        agencies: Option<usize>,
        #[arg(long)]
        quorum: Option<usize>,
        #[arg(long)]
        reward: Option<f64>,
        #[command(flatten)]
        scoping: ScopingFlags,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Replay a scripted sequence of consensus submissions
    ConsensusSim {
        #[arg(long)]
        script: PathBuf,
    },
    /// Run a scenario with the logarithmic differential off and on
    CompareLog {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        scoping: ScopingFlags,
        #[command(flatten)]
        engine: EngineFlags,
    },
}

/// JSON configuration file: `engine` holds engine parameters, `scoping` the
/// policy (`scoping.mode` etc.), `simulation` the consensus topology.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    engine: Option<EngineConfig>,
    scoping: Option<ScopingPolicy>,
    simulation: Option<SimSettings>,
    origin: Option<u64>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(msg: impl std::fmt::Display) -> Self {
        Self::Validation(msg.to_string())
    }

    fn runtime(msg: impl std::fmt::Display) -> Self {
        Self::Runtime(msg.to_string())
    }
}

/// Parse and execute a full command line (including the program name).
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("REPUTE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("repute-out"))
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let bytes = fs::read(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation(format!("bad config {}: {e}", path.display())))
}

fn resolve_engine(
    file: &FileConfig,
    flags: &EngineFlags,
) -> Result<EngineConfig, CliError> {
    let mut config = file.engine.clone().unwrap_or_default();
    flags.apply(&mut config);
    config.validate().map_err(CliError::validation)?;
    Ok(config)
}

fn resolve_policy(
    flags: &ScopingFlags,
    file: &FileConfig,
    default: ScopingPolicy,
) -> Result<ScopingPolicy, CliError> {
    let file_policy = file.scoping.clone();
    let mode = flags
        .mode
        .clone()
        .or_else(|| {
            file_policy.as_ref().map(|p| {
                match p {
                    ScopingPolicy::Lifetime { .. } => "lifetime",
                    ScopingPolicy::Incremental => "incremental",
                    ScopingPolicy::UpToDate { .. } => "up-to-date",
                    ScopingPolicy::BlockedIncremental { .. } => "blocked-incremental",
                }
                .to_string()
            })
        })
        .unwrap_or_else(|| match default {
            ScopingPolicy::Lifetime { .. } => "lifetime".into(),
            ScopingPolicy::Incremental => "incremental".into(),
            ScopingPolicy::UpToDate { .. } => "up-to-date".into(),
            ScopingPolicy::BlockedIncremental { .. } => "blocked-incremental".into(),
        });

    let policy = match mode.as_str() {
        "lifetime" => {
            let from_file = match file_policy {
                Some(ScopingPolicy::Lifetime { half_life }) => Some(half_life),
                _ => None,
            };
            ScopingPolicy::Lifetime {
                half_life: flags.half_life.or(from_file).unwrap_or(f64::INFINITY),
            }
        }
        "incremental" => ScopingPolicy::Incremental,
        "up-to-date" | "up_to_date" => {
            let from_file = match file_policy {
                Some(ScopingPolicy::UpToDate { window }) => Some(window),
                _ => None,
            };
            ScopingPolicy::UpToDate {
                window: flags.window.or(from_file).unwrap_or(1),
            }
        }
        "blocked-incremental" | "blocked_incremental" => {
            let from_file = match file_policy {
                Some(ScopingPolicy::BlockedIncremental { block_size }) => Some(block_size),
                _ => None,
            };
            ScopingPolicy::BlockedIncremental {
                block_size: flags.block_size.or(from_file).unwrap_or(1),
            }
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown scoping mode `{other}`"
            )))
        }
    };
    policy.validate().map_err(CliError::validation)?;
    Ok(policy)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts and their digests; nothing touches the disk until the
/// run has produced every artifact.
struct ArtifactSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl ArtifactSet {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::runtime(format!("serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn digests(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .map(|(name, bytes)| (name.clone(), sha256_hex(bytes)))
            .collect()
    }

    fn flush(mut self, manifest: &RunManifest) -> Result<(), CliError> {
        let manifest_bytes = serde_json::to_vec_pretty(manifest)
            .map_err(|e| CliError::runtime(format!("serialize manifest: {e}")))?;
        let mut bytes = manifest_bytes;
        bytes.push(b'\n');
        self.files.push(("manifest.json".into(), bytes));
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::runtime(format!("create {}: {e}", self.dir.display())))?;
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)
                .map_err(|e| CliError::runtime(format!("write {name}: {e}")))?;
        }
        Ok(())
    }
}

/// Reproducibility record: effective configuration plus input/output digests.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    effective: EffectiveConfig,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct EffectiveConfig {
    engine: EngineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    scoping: Option<ScopingPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimSettings>,
    origin: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn input_digest(
    inputs: &mut BTreeMap<String, String>,
    path: &Path,
) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("input")
        .to_string();
    inputs.insert(name, sha256_hex(&bytes));
    Ok(bytes)
}

fn parse_format(s: Option<&str>) -> Result<Option<LogFormat>, CliError> {
    match s {
        None => Ok(None),
        Some("jsonl") => Ok(Some(LogFormat::JsonLines)),
        Some("csv") => Ok(Some(LogFormat::Csv)),
        Some(other) => Err(CliError::validation(format!(
            "unknown log format `{other}` (expected jsonl or csv)"
        ))),
    }
}

#[derive(Serialize)]
struct ComputeReport<'a> {
    ingested: usize,
    rejected_lines: &'a [crate::storage::LineError],
    skipped_slices: usize,
    out_of_window: usize,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let dir = out_dir(cli.out.clone());
    let file_config = load_file_config(cli.config.as_deref())?;
    let mut inputs = BTreeMap::new();
    if let Some(path) = cli.config.as_deref() {
        input_digest(&mut inputs, path)?;
    }

    match cli.command {
        Command::Compute {
            ratings,
            format,
            origin,
            as_of,
            engine,
        } => {
            let config = resolve_engine(&file_config, &engine)?;
            let format = parse_format(format.as_deref())?;
            input_digest(&mut inputs, &ratings)?;
            let ingested = ingest_path(&ratings, format).map_err(CliError::validation)?;
            let origin = Timestamp(origin.or(file_config.origin).unwrap_or(0));
            let end = as_of
                .map(Timestamp)
                .or_else(|| ingested.records.last().map(|r| r.time));

            let mut artifacts = ArtifactSet::new(dir);
            let (state, skipped, out_of_window) = match end {
                Some(end) if end > origin => {
                    let prior = ReputationState::genesis(origin);
                    let outcome = compute_period(&ingested.records, &prior, end, &config)
                        .map_err(CliError::runtime)?;
                    (
                        outcome.state,
                        outcome.differential.skipped.len(),
                        outcome.out_of_window,
                    )
                }
                _ => (ReputationState::genesis(origin), 0, 0),
            };
            let doc = SnapshotDoc::from_state(&state, config.hash_precision)
                .map_err(CliError::runtime)?;
            artifacts.add_json("state.json", &doc)?;
            artifacts.add_json(
                "report.json",
                &ComputeReport {
                    ingested: ingested.records.len(),
                    rejected_lines: &ingested.errors,
                    skipped_slices: skipped,
                    out_of_window,
                },
            )?;
            let manifest = RunManifest {
                tool: "repute",
                version: env!("CARGO_PKG_VERSION"),
                command: "compute".into(),
                effective: EffectiveConfig {
                    engine: config,
                    scoping: None,
                    simulation: None,
                    origin: origin.ticks(),
                    seed: None,
                },
                inputs,
                outputs: artifacts.digests(),
            };
            artifacts.flush(&manifest)
        }
        Command::Schedule {
            ratings,
            format,
            origin,
            scoping,
            engine,
        } => {
            let config = resolve_engine(&file_config, &engine)?;
            let policy = resolve_policy(
                &scoping,
                &file_config,
                ScopingPolicy::UpToDate { window: 1 },
            )?;
            let format = parse_format(format.as_deref())?;
            input_digest(&mut inputs, &ratings)?;
            let ingested = ingest_path(&ratings, format).map_err(CliError::validation)?;
            let origin = Timestamp(origin.or(file_config.origin).unwrap_or(0));

            let outcome = run_schedule(&ingested.records, &policy, &config, origin)
                .map_err(CliError::runtime)?;
            let mut artifacts = ArtifactSet::new(dir);
            let mut states_jsonl = Vec::new();
            let mut skipped = 0usize;
            for w in &outcome.windows {
                skipped += w.differential.skipped.len();
                let doc = SnapshotDoc::from_state(&w.state, config.hash_precision)
                    .map_err(CliError::runtime)?;
                serde_json::to_writer(&mut states_jsonl, &doc)
                    .map_err(|e| CliError::runtime(format!("serialize window state: {e}")))?;
                states_jsonl.push(b'\n');
            }
            artifacts.add("states.jsonl", states_jsonl);
            let final_doc = SnapshotDoc::from_state(&outcome.final_state, config.hash_precision)
                .map_err(CliError::runtime)?;
            artifacts.add_json("state.json", &final_doc)?;
            artifacts.add_json(
                "report.json",
                &ComputeReport {
                    ingested: ingested.records.len(),
                    rejected_lines: &ingested.errors,
                    skipped_slices: skipped,
                    out_of_window: 0,
                },
            )?;
            let manifest = RunManifest {
                tool: "repute",
                version: env!("CARGO_PKG_VERSION"),
                command: "schedule".into(),
                effective: EffectiveConfig {
                    engine: config,
                    scoping: Some(policy),
                    simulation: None,
                    origin: origin.ticks(),
                    seed: None,
                },
                inputs,
                outputs: artifacts.digests(),
            };
            artifacts.flush(&manifest)
        }
        Command::Simulate {
            scenario,
            seed,
            agencies,
            quorum,
            reward,
            scoping,
            engine,
        } => {
            let config = resolve_engine(&file_config, &engine)?;
            let policy = resolve_policy(
                &scoping,
                &file_config,
                ScopingPolicy::UpToDate { window: 1 },
            )?;
            let bytes = input_digest(&mut inputs, &scenario)?;
            let mut spec: ScenarioSpec = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::validation(format!("bad scenario: {e}")))?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            spec.validate().map_err(CliError::validation)?;
            let mut sim = file_config.simulation.clone().unwrap_or_default();
            if let Some(a) = agencies {
                sim.agencies = a;
            }
            if let Some(q) = quorum {
                sim.quorum = q;
            }
            if let Some(r) = reward {
                sim.reward = r;
            }
            sim.validate().map_err(CliError::validation)?;

            let outcome =
                run_scenario(&spec, &policy, &config, &sim).map_err(CliError::runtime)?;

            let mut artifacts = ArtifactSet::new(dir);
            let mut ratings_jsonl = Vec::new();
            write_rating_log(&outcome.records, &mut ratings_jsonl)
                .map_err(|e| CliError::runtime(format!("serialize ratings: {e}")))?;
            artifacts.add("ratings.jsonl", ratings_jsonl);

            let mut states_jsonl = Vec::new();
            for w in &outcome.schedule.windows {
                let doc = SnapshotDoc::from_state(&w.state, config.hash_precision)
                    .map_err(CliError::runtime)?;
                serde_json::to_writer(&mut states_jsonl, &doc)
                    .map_err(|e| CliError::runtime(format!("serialize window state: {e}")))?;
                states_jsonl.push(b'\n');
            }
            artifacts.add("states.jsonl", states_jsonl);

            let final_doc =
                SnapshotDoc::from_state(&outcome.schedule.final_state, config.hash_precision)
                    .map_err(CliError::runtime)?;
            artifacts.add_json("state.json", &final_doc)?;

            let mut transcript_jsonl = Vec::new();
            crate::consensus::write_transcript(&outcome.transcript, &mut transcript_jsonl)
                .map_err(|e| CliError::runtime(format!("serialize transcript: {e}")))?;
            artifacts.add("transcript.jsonl", transcript_jsonl);

            artifacts.add_json("metrics.json", &outcome.metrics)?;
            artifacts.add_json("ledger.json", &outcome.ledger)?;
            artifacts.add("trajectories.csv", trajectories_csv(&outcome.metrics));

            let manifest = RunManifest {
                tool: "repute",
                version: env!("CARGO_PKG_VERSION"),
                command: "simulate".into(),
                effective: EffectiveConfig {
                    engine: config,
                    scoping: Some(policy),
                    simulation: Some(sim),
                    origin: 0,
                    seed: Some(spec.seed),
                },
                inputs,
                outputs: artifacts.digests(),
            };
            artifacts.flush(&manifest)
        }
        Command::ConsensusSim { script } => {
            let bytes = input_digest(&mut inputs, &script)?;
            let script: ConsensusScript = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::validation(format!("bad script: {e}")))?;
            script.validate().map_err(CliError::validation)?;

            let mut transcript = Vec::new();
            let mut rejections = Vec::new();
            let mut ledger = MiningLedger::default();
            for round_spec in &script.rounds {
                let mut round = ConsensusRound::new(
                    round_spec.round,
                    round_spec.quorum_min,
                    round_spec.submissions_max,
                    Timestamp(round_spec.deadline),
                )
                .map_err(CliError::validation)?;
                let weighted: Option<BTreeMap<AgencyId, f64>> =
                    round_spec.agency_reputations.as_ref().map(|reps| {
                        reps.iter()
                            .map(|(a, &r)| (AgencyId::new(a.clone()), r))
                            .collect()
                    });
                for s in &round_spec.submissions {
                    let submission = StateSubmission {
                        agency: AgencyId::new(s.agency.clone()),
                        round: round_spec.round,
                        state_hash: StateDigest::from_raw(s.hash.clone()),
                        received_at: Timestamp(s.received_at),
                    };
                    let result = match &weighted {
                        Some(reps) => round.submit_weighted(submission, reps),
                        None => round.submit(submission),
                    };
                    if let Err(e) = result {
                        rejections.push(Rejection {
                            round: round_spec.round,
                            agency: s.agency.clone(),
                            reason: e.to_string(),
                        });
                    }
                }
                if let Some(at) = round_spec.expire_at {
                    round.expire(Timestamp(at));
                }
                transcript.extend_from_slice(round.transcript());
                if matches!(round.verdict, Verdict::Valid(_)) {
                    if let Some(reward) = round_spec.reward {
                        let credits = credit_miners(&round, &mut ledger, reward)
                            .map_err(CliError::runtime)?;
                        for (agency, amount) in credits {
                            transcript.push(TranscriptEvent::Reward {
                                round: round_spec.round,
                                agency,
                                amount,
                            });
                        }
                    }
                }
            }

            let mut artifacts = ArtifactSet::new(dir);
            let mut transcript_jsonl = Vec::new();
            crate::consensus::write_transcript(&transcript, &mut transcript_jsonl)
                .map_err(|e| CliError::runtime(format!("serialize transcript: {e}")))?;
            artifacts.add("transcript.jsonl", transcript_jsonl);
            artifacts.add_json(
                "report.json",
                &ConsensusSimReport {
                    rounds: script.rounds.len(),
                    rejections: &rejections,
                    ledger: &ledger,
                },
            )?;
            let manifest = RunManifest {
                tool: "repute",
                version: env!("CARGO_PKG_VERSION"),
                command: "consensus-sim".into(),
                effective: EffectiveConfig {
                    engine: EngineConfig::default(),
                    scoping: None,
                    simulation: None,
                    origin: 0,
                    seed: None,
                },
                inputs,
                outputs: artifacts.digests(),
            };
            artifacts.flush(&manifest)
        }
        Command::CompareLog {
            scenario,
            seed,
            scoping,
            engine,
        } => {
            let config = resolve_engine(&file_config, &engine)?;
            let policy = resolve_policy(
                &scoping,
                &file_config,
                ScopingPolicy::UpToDate { window: 1 },
            )?;
            let bytes = input_digest(&mut inputs, &scenario)?;
            let mut spec: ScenarioSpec = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::validation(format!("bad scenario: {e}")))?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            spec.validate().map_err(CliError::validation)?;
            let sim = file_config.simulation.clone().unwrap_or_default();
            sim.validate().map_err(CliError::validation)?;

            let paired = compare_linear_vs_log(&spec, &policy, &config, &sim)
                .map_err(CliError::runtime)?;
            let mut artifacts = ArtifactSet::new(dir);
            artifacts.add_json("compare.json", &paired)?;
            let manifest = RunManifest {
                tool: "repute",
                version: env!("CARGO_PKG_VERSION"),
                command: "compare-log".into(),
                effective: EffectiveConfig {
                    engine: config,
                    scoping: Some(policy),
                    simulation: Some(sim),
                    origin: 0,
                    seed: Some(spec.seed),
                },
                inputs,
                outputs: artifacts.digests(),
            };
            artifacts.flush(&manifest)
        }
    }
}

fn trajectories_csv(metrics: &crate::simnet::MetricsReport) -> Vec<u8> {
    let mut out = String::from("window_end,member,reputation\n");
    for p in &metrics.trajectories {
        out.push_str(&format!("{},{},{}\n", p.t, p.member, p.reputation));
    }
    out.into_bytes()
}

#[derive(Serialize)]
struct Rejection {
    round: u64,
    agency: String,
    reason: String,
}

#[derive(Serialize)]
struct ConsensusSimReport<'a> {
    rounds: usize,
    rejections: &'a [Rejection],
    ledger: &'a MiningLedger,
}

/// Scripted consensus rounds for `consensus-sim`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsensusScript {
    rounds: Vec<ScriptRound>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptRound {
    round: u64,
    quorum_min: usize,
    submissions_max: usize,
    deadline: u64,
    #[serde(default)]
    reward: Option<f64>,
    /// Present: weighted mode with these agency reputations.
    #[serde(default)]
    agency_reputations: Option<BTreeMap<String, f64>>,
    submissions: Vec<ScriptSubmission>,
    #[serde(default)]
    expire_at: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptSubmission {
    agency: String,
    hash: String,
    received_at: u64,
}

impl ConsensusScript {
    fn validate(&self) -> Result<(), String> {
        for r in &self.rounds {
            if r.quorum_min == 0 || r.submissions_max < r.quorum_min {
                return Err(format!(
                    "round {}: need 1 <= quorum_min <= submissions_max",
                    r.round
                ));
            }
            if let Some(reward) = r.reward {
                if !reward.is_finite() || reward < 0.0 {
                    return Err(format!("round {}: invalid reward {reward}", r.round));
                }
            }
        }
        Ok(())
    }
}
