//! Deterministic society generator and attack laboratory.
//!
//! A scenario file describes populations of behavioral archetypes (honest
//! raters, sybil rings, collusion cliques, spammers) plus a seed and a tick
//! horizon. Generation is fully deterministic: one stable sub-seeded stream
//! per agent, so adding an agent never perturbs the draws of the others.
//!
//! [`run_scenario`] feeds the generated log through the engine under a
//! scoping policy, replays the per-window states through a consensus round
//! per window across simulated agencies, and reports distribution metrics
//! against the generator's latent ground truth.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::consensus::{
    credit_miners, AgencyId, ConsensusRound, MiningLedger, StateSubmission, TranscriptEvent,
    Verdict,
};
use crate::metrics::{gini, shannon_entropy, spearman};
use crate::model::{
    canonical_hash, EngineConfig, MemberId, RatingKind, RatingRecord, ReputationState, Timestamp,
};
use crate::scoping::{run_schedule, ScheduleError, ScheduleOutcome, ScopingPolicy};

/// Behavioral archetypes a population can follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Rates random visible members with values tracking the targets' latent
    /// quality.
    Honest,
    /// Zero-history identities cross-rating each other with maximal values;
    /// invisible to organic raters.
    SybilRing,
    /// Members that rate honestly outward while mutually inflating each
    /// other inside the clique.
    CollusionClique,
    /// High-volume random ratings at random values.
    Spammer,
}

impl Archetype {
    fn slug(self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::SybilRing => "sybil",
            Self::CollusionClique => "clique",
            Self::Spammer => "spam",
        }
    }

    pub fn is_attack(self) -> bool {
        !matches!(self, Self::Honest)
    }
}

/// Per-population knobs; unset fields fall back to archetype defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchetypeParams {
    /// Expected ratings issued per member per tick.
    pub rate: Option<f64>,
    /// Half-width of the uniform noise added to honest rating values.
    pub value_noise: Option<f64>,
    /// Rating channel to emit on.
    pub kind: Option<RatingKind>,
    /// Distribution of the backing weight (stake / financial value).
    pub weight: Option<WeightDist>,
    /// Clique-internal mutual rating rate (collusion cliques only).
    pub mutual_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum WeightDist {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Heavy-tailed weights: `scale / (1-u)^(1/shape)`.
    Pareto { scale: f64, shape: f64 },
}

impl WeightDist {
    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            WeightDist::Fixed { value } => value.is_finite() && value >= 0.0,
            WeightDist::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && 0.0 <= low && low <= high
            }
            WeightDist::Pareto { scale, shape } => {
                scale.is_finite() && scale > 0.0 && shape.is_finite() && shape > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(format!(
                "invalid weight distribution {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            WeightDist::Fixed { value } => value,
            WeightDist::Uniform { low, high } => low + rng.gen::<f64>() * (high - low),
            WeightDist::Pareto { scale, shape } => {
                let u: f64 = rng.gen();
                scale / (1.0 - u).powf(1.0 / shape)
            }
        }
    }
}

/// Ground-truth quality distribution for generated members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum QualityDistribution {
    Uniform { low: f64, high: f64 },
    Fixed { value: f64 },
}

impl Default for QualityDistribution {
    fn default() -> Self {
        Self::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

impl QualityDistribution {
    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            QualityDistribution::Uniform { low, high } => {
                (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high) && low <= high
            }
            QualityDistribution::Fixed { value } => (0.0..=1.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(format!(
                "latent quality distribution out of [0, 1]: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            QualityDistribution::Uniform { low, high } => low + rng.gen::<f64>() * (high - low),
            QualityDistribution::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub archetype: Archetype,
    pub count: usize,
    #[serde(default)]
    pub params: ArchetypeParams,
}

/// Generative description of an agent society.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub ticks: u64,
    pub populations: Vec<Population>,
    #[serde(default)]
    pub latent_quality: QualityDistribution,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("consensus harness: {0}")]
    Consensus(#[from] crate::consensus::ConsensusError),
    #[error("state digest: {0}")]
    Hash(#[from] crate::model::HashError),
}

/// One generated member with its archetype and latent ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: MemberId,
    pub archetype: Archetype,
    pub population: usize,
    pub quality: f64,
}

/// The fully instantiated member roster of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Society {
    pub agents: Vec<Agent>,
}

impl Society {
    pub fn build(spec: &ScenarioSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let mut agents = Vec::new();
        for (pop_idx, pop) in spec.populations.iter().enumerate() {
            for i in 0..pop.count {
                let id = MemberId::new(format!(
                    "{}{}-{:03}",
                    pop.archetype.slug(),
                    pop_idx,
                    i
                ));
                let mut rng = sub_rng(spec.seed, "quality", id.as_str());
                let quality = spec.latent_quality.sample(&mut rng);
                agents.push(Agent {
                    id,
                    archetype: pop.archetype,
                    population: pop_idx,
                    quality,
                });
            }
        }
        Ok(Self { agents })
    }

    pub fn quality_of(&self, member: &MemberId) -> Option<f64> {
        self.agents
            .iter()
            .find(|a| &a.id == member)
            .map(|a| a.quality)
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ticks == 0 {
            return Err(SimError::InvalidSpec("ticks must be at least 1".into()));
        }
        let total: usize = self.populations.iter().map(|p| p.count).sum();
        if total < 2 {
            return Err(SimError::InvalidSpec(
                "a society needs at least two members".into(),
            ));
        }
        self.latent_quality.validate()?;
        for (i, pop) in self.populations.iter().enumerate() {
            let check_rate = |name: &str, r: Option<f64>| {
                if let Some(r) = r {
                    if !r.is_finite() || r < 0.0 {
                        return Err(SimError::InvalidSpec(format!(
                            "population {i}: {name} {r} must be non-negative"
                        )));
                    }
                }
                Ok(())
            };
            check_rate("rate", pop.params.rate)?;
            check_rate("mutual_rate", pop.params.mutual_rate)?;
            check_rate("value_noise", pop.params.value_noise)?;
            if let Some(w) = &pop.params.weight {
                w.validate()?;
            }
        }
        Ok(())
    }
}

/// Stable per-purpose stream derivation: the scenario seed, a purpose tag and
/// the member id are hashed into a ChaCha8 seed, so streams never depend on
/// how many other agents exist.
fn sub_rng(seed: u64, tag: &str, id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"repute-sim-v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    let threshold = (-lambda).exp();
    let mut k = 0u64;
    let mut p = 1.0f64;
    loop {
        p *= rng.gen::<f64>();
        if p <= threshold || k > 10_000 {
            return k;
        }
        k += 1;
    }
}

/// Target value an honest rater gives a member of quality `q`, with uniform
/// noise of half-width `noise`; quality 0 maps to -1 and quality 1 to +1.
fn honest_value(rng: &mut ChaCha8Rng, quality: f64, noise: f64) -> f64 {
    let jitter = (rng.gen::<f64>() * 2.0 - 1.0) * noise;
    (2.0 * quality - 1.0 + jitter).clamp(-1.0, 1.0)
}

const DEFAULT_HONEST_RATE: f64 = 1.0;
const DEFAULT_SPAM_RATE: f64 = 5.0;
const DEFAULT_NOISE: f64 = 0.1;

/// Generate the time-ordered rating log of a scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<Vec<RatingRecord>, SimError> {
    let society = Society::build(spec)?;
    Ok(generate_for(&society, spec))
}

fn generate_for(society: &Society, spec: &ScenarioSpec) -> Vec<RatingRecord> {
    let n = society.agents.len();
    // organic raters never discover sybil identities
    let visible: Vec<usize> = (0..n)
        .filter(|&i| society.agents[i].archetype != Archetype::SybilRing)
        .collect();
    let mut peers_by_population: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, a) in society.agents.iter().enumerate() {
        peers_by_population.entry(a.population).or_default().push(i);
    }

    let mut records = Vec::new();
    let mut rngs: Vec<ChaCha8Rng> = society
        .agents
        .iter()
        .map(|a| sub_rng(spec.seed, "agent", a.id.as_str()))
        .collect();

    for tick in 1..=spec.ticks {
        for (idx, agent) in society.agents.iter().enumerate() {
            let params = &spec.populations[agent.population].params;
            let rng = &mut rngs[idx];
            let kind = params.kind.unwrap_or(RatingKind::Vote);
            let weight_dist = params
                .weight
                .clone()
                .unwrap_or(WeightDist::Fixed { value: 1.0 });
            let noise = params.value_noise.unwrap_or(DEFAULT_NOISE);

            let emit = |rng: &mut ChaCha8Rng,
                            records: &mut Vec<RatingRecord>,
                            target: usize,
                            value: f64| {
                records.push(RatingRecord {
                    kind,
                    from: agent.id.clone(),
                    to: society.agents[target].id.clone(),
                    time: Timestamp(tick),
                    value: if kind == RatingKind::Finance { 1.0 } else { value },
                    weight: weight_dist.sample(rng),
                    aspect: None,
                    category: None,
                    event: None,
                });
            };

            match agent.archetype {
                Archetype::Honest => {
                    let rate = params.rate.unwrap_or(DEFAULT_HONEST_RATE);
                    let pool: Vec<usize> =
                        visible.iter().copied().filter(|&t| t != idx).collect();
                    if pool.is_empty() {
                        continue;
                    }
                    for _ in 0..poisson(rng, rate) {
                        let target = pool[rng.gen_range(0..pool.len())];
                        let value = honest_value(rng, society.agents[target].quality, noise);
                        emit(rng, &mut records, target, value);
                    }
                }
                Archetype::SybilRing => {
                    let rate = params.rate.unwrap_or(DEFAULT_HONEST_RATE);
                    let ring: Vec<usize> = peers_by_population[&agent.population]
                        .iter()
                        .copied()
                        .filter(|&t| t != idx)
                        .collect();
                    if ring.is_empty() {
                        continue;
                    }
                    for _ in 0..poisson(rng, rate) {
                        let target = ring[rng.gen_range(0..ring.len())];
                        emit(rng, &mut records, target, 1.0);
                    }
                }
                Archetype::CollusionClique => {
                    let mutual_rate = params.mutual_rate.unwrap_or(DEFAULT_HONEST_RATE);
                    let clique: Vec<usize> = peers_by_population[&agent.population]
                        .iter()
                        .copied()
                        .filter(|&t| t != idx)
                        .collect();
                    for _ in 0..poisson(rng, mutual_rate) {
                        if clique.is_empty() {
                            break;
                        }
                        let target = clique[rng.gen_range(0..clique.len())];
                        emit(rng, &mut records, target, 1.0);
                    }
                    let rate = params.rate.unwrap_or(DEFAULT_HONEST_RATE);
                    let outward: Vec<usize> = visible
                        .iter()
                        .copied()
                        .filter(|&t| t != idx && society.agents[t].population != agent.population)
                        .collect();
                    if outward.is_empty() {
                        continue;
                    }
                    for _ in 0..poisson(rng, rate) {
                        let target = outward[rng.gen_range(0..outward.len())];
                        let value = honest_value(rng, society.agents[target].quality, noise);
                        emit(rng, &mut records, target, value);
                    }
                }
                Archetype::Spammer => {
                    let rate = params.rate.unwrap_or(DEFAULT_SPAM_RATE);
                    let pool: Vec<usize> = (0..n).filter(|&t| t != idx).collect();
                    if pool.is_empty() {
                        continue;
                    }
                    for _ in 0..poisson(rng, rate) {
                        let target = pool[rng.gen_range(0..pool.len())];
                        let value = rng.gen::<f64>() * 2.0 - 1.0;
                        emit(rng, &mut records, target, value);
                    }
                }
            }
        }
    }
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    records
}

/// Consensus topology and reward settings for a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub agencies: usize,
    pub quorum: usize,
    pub reward: f64,
    /// Inject a faulty agency that perturbs its computed states before
    /// submitting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultInjection>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            agencies: 3,
            quorum: 2,
            reward: 1.0,
            fault: None,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.agencies == 0 || self.quorum == 0 || self.quorum > self.agencies {
            return Err(SimError::InvalidSpec(format!(
                "need 1 <= quorum ({}) <= agencies ({})",
                self.quorum, self.agencies
            )));
        }
        if !self.reward.is_finite() || self.reward < 0.0 {
            return Err(SimError::InvalidSpec(format!(
                "reward {} must be non-negative",
                self.reward
            )));
        }
        if let Some(f) = &self.fault {
            if f.agency >= self.agencies {
                return Err(SimError::InvalidSpec(format!(
                    "fault agency {} out of range",
                    f.agency
                )));
            }
        }
        Ok(())
    }
}

/// A single agency that adds `offset` to the first member's reputation in
/// every state it submits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub agency: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub member: MemberId,
    pub reputation: f64,
}

/// Distribution and attack metrics of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub members: usize,
    pub records: usize,
    pub windows: usize,
    pub rounds_valid: usize,
    pub rounds_broken: usize,
    pub rounds_disputed: usize,
    /// Rank correlation between latent quality and final reputation; absent
    /// without honest members or without rank variance.
    pub spearman_quality_vs_reputation: Option<f64>,
    pub gini: f64,
    pub entropy: f64,
    /// Mean final reputation of the attack populations minus the default
    /// reputation; absent when the scenario has no attack population.
    pub attacker_gain: Option<f64>,
    pub trajectories: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub metrics: MetricsReport,
    pub records: Vec<RatingRecord>,
    pub schedule: ScheduleOutcome,
    pub transcript: Vec<TranscriptEvent>,
    pub ledger: MiningLedger,
}

/// Generate a scenario's rating log, run every agency through the same
/// deterministic pipeline, drive one consensus round per recalculation
/// window, and measure the outcome.
pub fn run_scenario(
    spec: &ScenarioSpec,
    policy: &ScopingPolicy,
    config: &EngineConfig,
    sim: &SimSettings,
) -> Result<ScenarioOutcome, SimError> {
    sim.validate()?;
    let society = Society::build(spec)?;
    let records = generate_for(&society, spec);

    // Agency 0..n all run the identical pipeline; the canonical (unfaulted)
    // run also provides the metrics and trajectories.
    let canonical = run_schedule(&records, policy, config, Timestamp(0))?;
    let mut per_agency_hashes = Vec::with_capacity(sim.agencies);
    for a in 0..sim.agencies {
        let run = run_schedule(&records, policy, config, Timestamp(0))?;
        let mut hashes = Vec::with_capacity(run.windows.len());
        for w in &run.windows {
            let mut state = w.state.clone();
            if let Some(fault) = &sim.fault {
                if fault.agency == a {
                    if let Some((member, value)) = state
                        .entries
                        .iter()
                        .next()
                        .map(|(m, v)| (m.clone(), *v))
                    {
                        state.entries.insert(member, (value + fault.offset).clamp(-1.0, 1.0));
                    }
                }
            }
            hashes.push(canonical_hash(&state, config.hash_precision)?);
        }
        per_agency_hashes.push(hashes);
    }

    let agencies: Vec<AgencyId> = (0..sim.agencies)
        .map(|a| AgencyId::new(format!("agency-{a:03}")))
        .collect();
    let mut transcript = Vec::new();
    let mut ledger = MiningLedger::default();
    let mut rounds_valid = 0;
    let mut rounds_broken = 0;
    let mut rounds_disputed = 0;

    for (w_idx, window) in canonical.windows.iter().enumerate() {
        let mut round =
            ConsensusRound::new(w_idx as u64, sim.quorum, sim.agencies, window.end)?;
        for (a, agency) in agencies.iter().enumerate() {
            let submission = StateSubmission {
                agency: agency.clone(),
                round: w_idx as u64,
                state_hash: per_agency_hashes[a][w_idx].clone(),
                received_at: window.end,
            };
            match round.submit(submission) {
                Ok(()) => {}
                Err(crate::consensus::ConsensusError::RoundClosed) => break,
                Err(e) => return Err(e.into()),
            }
        }
        round.expire(Timestamp(window.end.ticks() + 1));
        if round.disputed {
            rounds_disputed += 1;
        }
        transcript.extend_from_slice(round.transcript());
        match &round.verdict {
            Verdict::Valid(_) => {
                rounds_valid += 1;
                for (agency, amount) in credit_miners(&round, &mut ledger, sim.reward)? {
                    transcript.push(TranscriptEvent::Reward {
                        round: w_idx as u64,
                        agency,
                        amount,
                    });
                }
            }
            Verdict::Broken => rounds_broken += 1,
            Verdict::Pending => unreachable!("expired rounds cannot stay pending"),
        }
    }

    let metrics = measure(
        &society,
        &records,
        &canonical,
        config,
        rounds_valid,
        rounds_broken,
        rounds_disputed,
    );
    Ok(ScenarioOutcome {
        metrics,
        records,
        schedule: canonical,
        transcript,
        ledger,
    })
}

fn measure(
    society: &Society,
    records: &[RatingRecord],
    schedule: &ScheduleOutcome,
    config: &EngineConfig,
    rounds_valid: usize,
    rounds_broken: usize,
    rounds_disputed: usize,
) -> MetricsReport {
    let final_state = &schedule.final_state;
    let effective = |state: &ReputationState, m: &MemberId| {
        state
            .reputation_of(m)
            .unwrap_or(config.default_reputation)
    };

    let qualities: Vec<f64> = society.agents.iter().map(|a| a.quality).collect();
    let reputations: Vec<f64> = society
        .agents
        .iter()
        .map(|a| effective(final_state, &a.id))
        .collect();
    let has_honest = society
        .agents
        .iter()
        .any(|a| a.archetype == Archetype::Honest);
    let rho = if has_honest {
        spearman(&qualities, &reputations)
    } else {
        None
    };

    let mass: Vec<f64> = reputations.iter().map(|&r| r.max(0.0)).collect();
    let attackers: Vec<f64> = society
        .agents
        .iter()
        .filter(|a| a.archetype.is_attack())
        .map(|a| effective(final_state, &a.id))
        .collect();
    let attacker_gain = if attackers.is_empty() {
        None
    } else {
        Some(attackers.iter().sum::<f64>() / attackers.len() as f64 - config.default_reputation)
    };

    let mut trajectories = Vec::new();
    for w in &schedule.windows {
        for (member, &value) in &w.state.entries {
            trajectories.push(TrajectoryPoint {
                t: w.end.ticks(),
                member: member.clone(),
                reputation: value,
            });
        }
    }

    MetricsReport {
        members: society.agents.len(),
        records: records.len(),
        windows: schedule.windows.len(),
        rounds_valid,
        rounds_broken,
        rounds_disputed,
        spearman_quality_vs_reputation: rho,
        gini: gini(&mass),
        entropy: shannon_entropy(&mass),
        attacker_gain,
        trajectories,
    }
}

/// Paired metrics of the same scenario with the logarithmic differential off
/// and on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMetrics {
    pub linear: MetricsReport,
    pub log: MetricsReport,
}

/// Run a scenario twice, toggling only logarithmic differential compression,
/// and report both distributions.
pub fn compare_linear_vs_log(
    spec: &ScenarioSpec,
    policy: &ScopingPolicy,
    config: &EngineConfig,
    sim: &SimSettings,
) -> Result<PairedMetrics, SimError> {
    let linear_config = EngineConfig {
        use_log_differential: false,
        ..config.clone()
    };
    let log_config = EngineConfig {
        use_log_differential: true,
        ..config.clone()
    };
    Ok(PairedMetrics {
        linear: run_scenario(spec, policy, &linear_config, sim)?.metrics,
        log: run_scenario(spec, policy, &log_config, sim)?.metrics,
    })
}
