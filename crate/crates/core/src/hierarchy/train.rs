//! Training driver, per-episode log rows, and agent bundles on disk.
//!
//! Log CSV header (one row per episode):
//! `episode,steps,outcome,ep_reward_low,ep_reward_high,loss_q,loss_c1,loss_c2,loss_actor,epsilon,wall_ms`.
//! Empty fields mean "not applicable this episode" (no updates ran, or the
//! level does not exist in flat mode).

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::learner::{episode_seed, HighRole, Learner, LearnerCounters, LearnerKind, LearnerSetup, LowRole, Roles, TrainError};
use super::record::{fmt, EpisodeRecord};
use super::TrainingMode;
use crate::agents::{DqnAgent, DqnCounters, Td3Agent, Td3Counters};
use crate::neuralnet::{Checkpoint, CheckpointError};
use crate::replay::{ReplayBuffer, ReplayError};
use crate::simworld::{NavEnv, OutcomeKind, World};

pub const LOG_HEADER: [&str; 11] = [
    "episode",
    "steps",
    "outcome",
    "ep_reward_low",
    "ep_reward_high",
    "loss_q",
    "loss_c1",
    "loss_c2",
    "loss_actor",
    "epsilon",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: u64,
    /// Alternating mode: share of the budget spent training the controller
    /// under uniformly random subgoals.
    pub pretrain_fraction: f64,
    /// Alternating mode: share spent training the planner over a frozen
    /// controller. The remainder trains both.
    pub planner_fraction: f64,
    /// Epsilon reaches its floor after this share of planner-learning episodes.
    pub epsilon_decay_fraction: f64,
    /// Write a checkpoint every this many episodes (0: only at the end).
    pub checkpoint_every: u64,
    /// Record wall-clock milliseconds per episode. Off by default so logs
    /// are byte-identical across runs.
    pub record_wall_time: bool,
    /// Store replay buffers in training checkpoints so a resumed run
    /// continues exactly. Without them checkpoints hold only the networks.
    pub save_replay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            pretrain_fraction: 0.4,
            planner_fraction: 0.4,
            epsilon_decay_fraction: 0.3,
            checkpoint_every: 0,
            record_wall_time: false,
            save_replay: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.episodes == 0 {
            return Err(TrainError::Config("episode budget must be positive".into()));
        }
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(self.pretrain_fraction)
            || !ok(self.planner_fraction)
            || self.pretrain_fraction + self.planner_fraction > 1.0
            || !ok(self.epsilon_decay_fraction)
        {
            return Err(TrainError::Config("phase fractions must lie in [0, 1] and sum to at most 1".into()));
        }
        Ok(())
    }

    /// Episode index where the planner phase starts and where the joint phase starts.
    fn phase_bounds(&self) -> (u64, u64) {
        let n = self.episodes as f64;
        let a = (self.pretrain_fraction * n).round() as u64;
        let b = ((self.pretrain_fraction + self.planner_fraction) * n).round() as u64;
        (a, b.max(a))
    }
}

/// Which levels explore and learn in training episode `episode`.
pub fn roles_for(kind: LearnerKind, mode: TrainingMode, config: &TrainConfig, episode: u64) -> Roles {
    if kind == LearnerKind::Flat {
        return Roles { high: HighRole::Greedy, low: LowRole::Learn };
    }
    match mode {
        TrainingMode::Joint => Roles::LEARN,
        TrainingMode::FrozenHigh => Roles { high: HighRole::Greedy, low: LowRole::Learn },
        TrainingMode::FrozenLow => Roles { high: HighRole::Learn, low: LowRole::Greedy },
        TrainingMode::Alternating => {
            let (a, b) = config.phase_bounds();
            if episode < a {
                Roles { high: HighRole::Random, low: LowRole::Learn }
            } else if episode < b {
                Roles { high: HighRole::Learn, low: LowRole::Greedy }
            } else {
                Roles::LEARN
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub episode: u64,
    pub steps: usize,
    pub outcome: OutcomeKind,
    pub reward_low: f64,
    pub reward_high: Option<f64>,
    pub loss_q: Option<f64>,
    pub loss_c1: Option<f64>,
    pub loss_c2: Option<f64>,
    pub loss_actor: Option<f64>,
    pub epsilon: Option<f64>,
    pub wall_ms: u64,
}

impl LogRow {
    pub fn from_record(episode: u64, kind: LearnerKind, record: &EpisodeRecord, wall_ms: u64) -> Self {
        Self {
            episode,
            steps: record.len(),
            outcome: record.outcome,
            reward_low: record.reward_low,
            reward_high: (kind == LearnerKind::Hierarchical).then_some(record.reward_high),
            loss_q: record.losses.q,
            loss_c1: record.losses.critic1,
            loss_c2: record.losses.critic2,
            loss_actor: record.losses.actor,
            epsilon: record.epsilon,
            wall_ms,
        }
    }

    pub fn to_fields(&self) -> [String; 11] {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        [
            self.episode.to_string(),
            self.steps.to_string(),
            self.outcome.as_str().to_string(),
            fmt(self.reward_low),
            opt(self.reward_high),
            opt(self.loss_q),
            opt(self.loss_c1),
            opt(self.loss_c2),
            opt(self.loss_actor),
            opt(self.epsilon),
            self.wall_ms.to_string(),
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("log header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("log row {row}: bad `{field}` value `{value}`")]
    Field { row: usize, field: &'static str, value: String },
    #[error("log has no rows")]
    Empty,
}

pub fn write_log_header<W: Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(LOG_HEADER)
}

pub fn write_log_row<W: Write>(w: &mut csv::Writer<W>, row: &LogRow) -> csv::Result<()> {
    w.write_record(row.to_fields())
}

/// Parses a training log; rejects headers other than [`LOG_HEADER`].
pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRow>, LogError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(LOG_HEADER.iter().copied()) {
        return Err(LogError::Header { expected: LOG_HEADER.join(","), found: header.iter().collect::<Vec<_>>().join(",") });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |field: &'static str, value: &str| LogError::Field { row, field, value: value.to_string() };
        let num = |idx: usize, field: &'static str| -> Result<f64, LogError> {
            rec[idx].parse::<f64>().map_err(|_| bad(field, &rec[idx]))
        };
        let opt = |idx: usize, field: &'static str| -> Result<Option<f64>, LogError> {
            if rec[idx].is_empty() {
                Ok(None)
            } else {
                rec[idx].parse::<f64>().map(Some).map_err(|_| bad(field, &rec[idx]))
            }
        };
        rows.push(LogRow {
            episode: rec[0].parse().map_err(|_| bad("episode", &rec[0]))?,
            steps: rec[1].parse().map_err(|_| bad("steps", &rec[1]))?,
            outcome: OutcomeKind::parse(&rec[2]).ok_or_else(|| bad("outcome", &rec[2]))?,
            reward_low: num(3, "ep_reward_low")?,
            reward_high: opt(4, "ep_reward_high")?,
            loss_q: opt(5, "loss_q")?,
            loss_c1: opt(6, "loss_c1")?,
            loss_c2: opt(7, "loss_c2")?,
            loss_actor: opt(8, "loss_actor")?,
            epsilon: opt(9, "epsilon")?,
            wall_ms: rec[10].parse().map_err(|_| bad("wall_ms", &rec[10]))?,
        });
    }
    if rows.is_empty() {
        return Err(LogError::Empty);
    }
    Ok(rows)
}

/// Where a training run stands, saved alongside the agents so it can resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainState {
    pub config: TrainConfig,
    pub seed: u64,
    /// Episodes completed so far.
    pub episode: u64,
    /// World names or paths the run trains on, for reference by evaluation.
    #[serde(default)]
    pub worlds: Vec<String>,
}

/// Runs training episodes over a round-robin world list.
pub struct Trainer {
    pub learner: Learner,
    pub state: TrainState,
    envs: Vec<NavEnv>,
}

impl Trainer {
    pub fn new(learner: Learner, worlds: &[Arc<World>], config: TrainConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let mut t = Self::resume(learner, worlds, TrainState { config, seed, episode: 0, worlds: Vec::new() })?;
        let planner_episodes = (0..t.state.config.episodes).filter(|&e| t.roles(e).high == HighRole::Learn).count();
        let fraction = t.state.config.epsilon_decay_fraction;
        if let Some(dqn) = t.learner.dqn.as_mut() {
            dqn.config.epsilon.decay_steps = (fraction * planner_episodes as f64).ceil() as u64;
        }
        Ok(t)
    }

    /// Continues a run from a saved state.
    pub fn resume(learner: Learner, worlds: &[Arc<World>], state: TrainState) -> Result<Self, TrainError> {
        if worlds.is_empty() {
            return Err(TrainError::Config("at least one world is required".into()));
        }
        let envs = worlds.iter().map(|w| NavEnv::new(Arc::clone(w), learner.setup.env.clone())).collect();
        Ok(Self { learner, state, envs })
    }

    pub fn roles(&self, episode: u64) -> Roles {
        roles_for(self.learner.kind, self.learner.setup.hierarchy.training_mode, &self.state.config, episode)
    }

    pub fn is_finished(&self) -> bool {
        self.state.episode >= self.state.config.episodes
    }

    /// Runs the next training episode.
    pub fn next_episode(&mut self) -> Result<(EpisodeRecord, LogRow), TrainError> {
        let e = self.state.episode;
        let roles = self.roles(e);
        let seed = episode_seed(self.state.seed, e);
        let n_envs = self.envs.len() as u64;
        let env = &mut self.envs[(e % n_envs) as usize];
        let started = Instant::now();
        let record = self.learner.run_episode(env, seed, roles)?;
        let wall_ms = if self.state.config.record_wall_time { started.elapsed().as_millis() as u64 } else { 0 };
        if roles.high == HighRole::Learn {
            if let Some(dqn) = self.learner.dqn.as_mut() {
                dqn.advance_schedule();
            }
        }
        self.state.episode += 1;
        let row = LogRow::from_record(e, self.learner.kind, &record, wall_ms);
        Ok((record, row))
    }

    /// Runs to the end of the budget, calling `on_episode` after each one.
    pub fn run<F>(&mut self, mut on_episode: F) -> Result<(), TrainError>
    where
        F: FnMut(&Trainer, &EpisodeRecord, &LogRow) -> Result<(), TrainError>,
    {
        while !self.is_finished() {
            let (record, row) = self.next_episode()?;
            on_episode(self, &record, &row)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        bundle_checkpoint(&self.learner, Some(&self.state))
    }

    /// Rebuilds a trainer from a checkpoint written by [`Trainer::checkpoint`].
    /// Replay buffers are restored when the checkpoint carries them.
    pub fn from_checkpoint(ck: &Checkpoint, worlds: &[Arc<World>]) -> Result<Self, TrainError> {
        let (learner, state) = load_bundle(ck)?;
        let state = state.ok_or_else(|| TrainError::Config("checkpoint carries no training state".into()))?;
        Self::resume(learner, worlds, state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngState {
    seed: String,
    stream: u64,
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        let seed = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        Self { seed, stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    fn restore(&self) -> Result<ChaCha8Rng, CheckpointError> {
        use rand::SeedableRng;
        let bad = || CheckpointError::Malformed("bad generator state".into());
        if self.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleMeta {
    kind: LearnerKind,
    setup: LearnerSetup,
    td3_counters: Td3Counters,
    dqn_counters: Option<DqnCounters>,
    counters: LearnerCounters,
    rng: RngState,
    training: Option<TrainState>,
}

const TD3_PREFIX: &str = "low.";
const DQN_PREFIX: &str = "high.";
const LOW_REPLAY: &str = "low.replay";
const HIGH_REPLAY: &str = "high.replay";

/// Serialises agents, configuration, counters and generator state.
/// Replay buffers are left out.
pub fn bundle_checkpoint(learner: &Learner, training: Option<&TrainState>) -> Checkpoint {
    let mut setup = learner.setup.clone();
    // The live configs may have been adjusted (epsilon decay length).
    setup.td3 = learner.td3.config.clone();
    if let Some(d) = &learner.dqn {
        setup.dqn = d.config.clone();
    }
    let meta = BundleMeta {
        kind: learner.kind,
        setup,
        td3_counters: learner.td3.counters,
        dqn_counters: learner.dqn.as_ref().map(|d| d.counters),
        counters: learner.counters,
        rng: RngState::capture(&learner.rng),
        training: training.cloned(),
    };
    let mut ck = Checkpoint::new(serde_json::to_string(&meta).expect("bundle metadata serialises"));
    learner.td3.write_checkpoint(&mut ck, TD3_PREFIX);
    if let Some(d) = &learner.dqn {
        d.write_checkpoint(&mut ck, DQN_PREFIX);
    }
    if training.is_some_and(|t| t.config.save_replay) {
        ck.push_array(LOW_REPLAY, learner.low_buffer.snapshot());
        ck.push_array(HIGH_REPLAY, learner.high_buffer.snapshot());
    }
    ck
}

pub fn load_bundle(ck: &Checkpoint) -> Result<(Learner, Option<TrainState>), TrainError> {
    let meta: BundleMeta = serde_json::from_str(&ck.metadata)
        .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
    let td3 = Td3Agent::read_checkpoint(ck, TD3_PREFIX, meta.setup.td3.clone(), meta.td3_counters)?;
    let dqn = match meta.kind {
        LearnerKind::Flat => None,
        LearnerKind::Hierarchical => Some(DqnAgent::read_checkpoint(
            ck,
            DQN_PREFIX,
            meta.setup.dqn.clone(),
            meta.dqn_counters.unwrap_or_default(),
        )?),
    };
    let rng = meta.rng.restore()?;
    let mut learner = Learner::from_agents(meta.kind, meta.setup, td3, dqn, rng)?;
    learner.counters = meta.counters;
    let snapshot_err = |name: &str, e: ReplayError| CheckpointError::Malformed(format!("{name}: {e}"));
    if let Some(data) = ck.array(LOW_REPLAY) {
        learner.low_buffer = ReplayBuffer::from_snapshot(data).map_err(|e| snapshot_err(LOW_REPLAY, e))?;
    }
    if let Some(data) = ck.array(HIGH_REPLAY) {
        learner.high_buffer = ReplayBuffer::from_snapshot(data).map_err(|e| snapshot_err(HIGH_REPLAY, e))?;
    }
    for (name, len) in [(LOW_REPLAY, learner.low_buffer.obs_dim()), (HIGH_REPLAY, learner.high_buffer.obs_dim())] {
        if len != learner.setup.env.obs_dim() {
            return Err(CheckpointError::Malformed(format!("{name}: observation size {len} does not match the agents")).into());
        }
    }
    Ok((learner, meta.training))
}

/// Short human-readable description of a bundle.
pub fn describe_bundle(ck: &Checkpoint) -> Result<String, TrainError> {
    let meta: BundleMeta = serde_json::from_str(&ck.metadata)
        .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
    let mut s = String::new();
    s.push_str(&format!("kind: {}\n", meta.kind.as_str()));
    s.push_str(&format!("observation size: {}\n", meta.setup.env.obs_dim()));
    s.push_str(&format!("subgoal actions: {}\n", meta.setup.hierarchy.n_actions()));
    s.push_str(&format!(
        "learner: {} env steps, {} update events, {} low / {} high gradient steps, {} learning episodes\n",
        meta.counters.env_steps,
        meta.counters.update_events,
        meta.counters.low_grad_steps,
        meta.counters.high_grad_steps,
        meta.counters.episodes
    ));
    s.push_str(&format!(
        "td3: {} critic updates, {} actor updates, {} controller steps\n",
        meta.td3_counters.critic_updates, meta.td3_counters.actor_updates, meta.td3_counters.env_steps
    ));
    if let Some(d) = meta.dqn_counters {
        s.push_str(&format!("dqn: {} gradient steps, schedule step {}\n", d.grad_steps, d.schedule_step));
    }
    if let Some(t) = &meta.training {
        s.push_str(&format!("training: episode {} of {}, seed {}\n", t.episode, t.config.episodes, t.seed));
    }
    for e in &ck.entries {
        let arch = e.network.architecture();
        s.push_str(&format!(
            "entry {}: {} parameters, sizes {:?}{}\n",
            e.name,
            e.network.param_count(),
            arch.sizes,
            if e.adam.is_some() { ", with optimiser state" } else { "" }
        ));
    }
    for (name, data) in &ck.arrays {
        let stored = data.get(4).copied().unwrap_or(0.0);
        s.push_str(&format!("replay {name}: {stored} transitions\n"));
    }
    Ok(s)
}
