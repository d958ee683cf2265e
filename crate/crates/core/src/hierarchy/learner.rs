//! The episode loop shared by training and evaluation.
//!
//! In hierarchical mode the planner picks a subgoal at the first tick and
//! whenever the active one is reached or expires. The controller sees the
//! observation with its goal fields replaced by the subgoal's polar
//! coordinates. Each tick stores a low-level transition; each finished
//! subgoal stores one high-level transition spanning its lifetime.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{EpisodeLosses, EpisodeRecord, StepRecord, SubgoalEnd, SubgoalRecord};
use super::{
    execution_terms, high_level_inputs, obstacle_ahead, subgoal_decode, HierarchyConfig, HierarchyError, Subgoal,
    SubgoalTracker,
};
use crate::agents::{action_from_normalized, AgentError, DqnAgent, DqnConfig, Td3Agent, Td3Config};
use crate::neuralnet::CheckpointError;
use crate::replay::{ReplayBuffer, ReplayError, Transition};
use crate::rewards::{
    direction_reward, distance_reward, env_reward, high_level_reward, low_level_reward, HighRewardWeights,
    LowRewardWeights, RewardError, COLLISION_REWARD, GOAL_REWARD,
};
use crate::simworld::{EnvConfig, NavEnv, Observation, OutcomeKind, SimError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Observer(String),
}

impl TrainError {
    /// True for numerical blow-ups (NaN or infinite losses).
    pub fn is_non_finite(&self) -> bool {
        matches!(
            self,
            TrainError::Agent(AgentError::NonFinite(_)) | TrainError::Agent(AgentError::Net(crate::neuralnet::NetError::NonFinite(_)))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    /// TD3 alone, conditioned on the final goal.
    #[serde(rename = "td3")]
    Flat,
    /// DQN subgoal planner over a subgoal-conditioned TD3 controller.
    #[serde(rename = "hrl")]
    Hierarchical,
}

impl LearnerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "td3" => Some(LearnerKind::Flat),
            "hrl" => Some(LearnerKind::Hierarchical),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Flat => "td3",
            LearnerKind::Hierarchical => "hrl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighRole {
    /// Epsilon-greedy choices; transitions stored and trained on.
    Learn,
    Greedy,
    /// Uniformly random subgoals.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowRole {
    /// Exploration noise (or warm-up random actions); transitions stored and trained on.
    Learn,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roles {
    pub high: HighRole,
    pub low: LowRole,
}

impl Roles {
    pub const EVAL: Roles = Roles { high: HighRole::Greedy, low: LowRole::Greedy };
    pub const LEARN: Roles = Roles { high: HighRole::Learn, low: LowRole::Learn };

    pub fn is_learning(&self) -> bool {
        self.high == HighRole::Learn || self.low == LowRole::Learn
    }
}

/// Learner updates run every `update_every` environment steps of learning
/// episodes, each performing a fixed number of gradient steps per level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateSchedule {
    pub update_every: u64,
    pub low_gradient_steps: usize,
    pub high_gradient_steps: usize,
}

impl Default for UpdateSchedule {
    fn default() -> Self {
        Self { update_every: 100, low_gradient_steps: 100, high_gradient_steps: 100 }
    }
}

/// Everything needed to build a learner from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSetup {
    pub env: EnvConfig,
    pub hierarchy: HierarchyConfig,
    pub high_rewards: HighRewardWeights,
    pub low_rewards: LowRewardWeights,
    pub dqn: DqnConfig,
    pub td3: Td3Config,
    pub schedule: UpdateSchedule,
}

impl Default for LearnerSetup {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            hierarchy: HierarchyConfig::default(),
            high_rewards: HighRewardWeights::default(),
            low_rewards: LowRewardWeights::default(),
            dqn: DqnConfig::default(),
            td3: Td3Config::default(),
            schedule: UpdateSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LearnerCounters {
    /// Environment steps taken in learning episodes.
    pub env_steps: u64,
    pub update_events: u64,
    pub low_grad_steps: u64,
    pub high_grad_steps: u64,
    pub episodes: u64,
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub kind: LearnerKind,
    pub setup: LearnerSetup,
    pub td3: Td3Agent,
    pub dqn: Option<DqnAgent>,
    pub low_buffer: ReplayBuffer<[f64; 2]>,
    pub high_buffer: ReplayBuffer<usize>,
    pub rng: ChaCha8Rng,
    pub counters: LearnerCounters,
}

#[derive(Debug, Default, Clone, Copy)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Default)]
struct LossAcc {
    q: Mean,
    c1: Mean,
    c2: Mean,
    actor: Mean,
}

impl LossAcc {
    fn finish(&self) -> EpisodeLosses {
        EpisodeLosses { q: self.q.get(), critic1: self.c1.get(), critic2: self.c2.get(), actor: self.actor.get() }
    }
}

struct OpenSubgoal {
    id: usize,
    subgoal: Subgoal,
    previous_bearing: f64,
    obs: Vec<f64>,
    goal_distance: f64,
}

impl Learner {
    /// Fresh networks and empty buffers; all randomness derives from `seed`.
    pub fn new(kind: LearnerKind, setup: LearnerSetup, seed: u64) -> Result<Self, TrainError> {
        setup.hierarchy.validate()?;
        let obs_dim = setup.env.obs_dim();
        let td3 = Td3Agent::new(obs_dim, setup.td3.clone(), seed.wrapping_mul(4).wrapping_add(11))?;
        let dqn = match kind {
            LearnerKind::Flat => None,
            LearnerKind::Hierarchical => Some(DqnAgent::new(
                obs_dim,
                setup.hierarchy.n_actions(),
                setup.dqn.clone(),
                seed.wrapping_mul(4).wrapping_add(13),
            )?),
        };
        Self::from_agents(kind, setup, td3, dqn, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_agents(
        kind: LearnerKind,
        setup: LearnerSetup,
        td3: Td3Agent,
        dqn: Option<DqnAgent>,
        rng: ChaCha8Rng,
    ) -> Result<Self, TrainError> {
        let obs_dim = setup.env.obs_dim();
        if td3.obs_dim() != obs_dim {
            return Err(TrainError::Config(format!("TD3 expects {} inputs, environment gives {obs_dim}", td3.obs_dim())));
        }
        if kind == LearnerKind::Hierarchical {
            let d = dqn.as_ref().ok_or_else(|| TrainError::Config("hierarchical learner needs a DQN".into()))?;
            if d.obs_dim() != obs_dim || d.n_actions() != setup.hierarchy.n_actions() {
                return Err(TrainError::Config("DQN dimensions do not match the environment and subgoal space".into()));
            }
        }
        let low_buffer = ReplayBuffer::new(setup.td3.buffer_capacity, obs_dim)?;
        let high_buffer = ReplayBuffer::new(setup.dqn.buffer_capacity, obs_dim)?;
        Ok(Self { kind, setup, td3, dqn, low_buffer, high_buffer, rng, counters: LearnerCounters::default() })
    }

    fn dqn(&self) -> Result<&DqnAgent, TrainError> {
        self.dqn.as_ref().ok_or_else(|| TrainError::Config("no DQN in a flat learner".into()))
    }

    /// Runs one episode on `env` reset with `seed`. Roles decide which
    /// levels explore, store transitions, and train.
    pub fn run_episode(&mut self, env: &mut NavEnv, seed: u64, roles: Roles) -> Result<EpisodeRecord, TrainError> {
        if env.config().obs_dim() != self.setup.env.obs_dim() {
            return Err(TrainError::Config("environment observation size differs from the learner's".into()));
        }
        let hierarchical = self.kind == LearnerKind::Hierarchical;
        let max_range = env.config().max_range;
        let hcfg = self.setup.hierarchy.clone();
        let mut obs = env.reset(seed);
        let mut record = EpisodeRecord {
            seed,
            start: env.start(),
            goal: env.goal(),
            steps: Vec::new(),
            subgoals: Vec::new(),
            outcome: OutcomeKind::Running,
            reward_env: 0.0,
            reward_low: 0.0,
            reward_high: 0.0,
            losses: EpisodeLosses::default(),
            epsilon: None,
        };
        if hierarchical && roles.high == HighRole::Learn {
            record.epsilon = Some(self.dqn()?.epsilon());
        }
        let mut losses = LossAcc::default();
        let mut tracker = SubgoalTracker::new();
        let mut open: Option<OpenSubgoal> = None;

        loop {
            let pose = env.pose();
            if hierarchical && tracker.needs_decision(&pose, &hcfg) {
                let high_obs = obs.features(max_range);
                if let Some(o) = open.take() {
                    let status = tracker.status(&pose, &hcfg).expect("a subgoal is active");
                    let k = tracker.steps_since_issue();
                    self.close_subgoal(o, k, SubgoalEnd::Status(status), env, &obs, high_obs.clone(), roles, &mut record)?;
                }
                let n = hcfg.n_actions();
                let index = match roles.high {
                    HighRole::Learn | HighRole::Greedy => {
                        let dqn = self.dqn.as_ref().ok_or_else(|| TrainError::Config("no DQN in a flat learner".into()))?;
                        dqn.select_action(&high_obs, &mut self.rng, roles.high == HighRole::Greedy)?
                    }
                    HighRole::Random => self.rng.random_range(0..n),
                };
                let previous_bearing = tracker.reference_bearing(&pose);
                let subgoal = subgoal_decode(index, &pose, &env.world().bounds, &hcfg, env.steps())?;
                tracker.issue(subgoal);
                open = Some(OpenSubgoal {
                    id: tracker.issued() - 1,
                    subgoal,
                    previous_bearing,
                    obs: high_obs,
                    goal_distance: obs.goal_distance,
                });
            }

            let low_obs = match tracker.current() {
                Some(g) => retarget(env, &obs, g).features(max_range),
                None => obs.features(max_range),
            };
            let u = match roles.low {
                LowRole::Learn if self.td3.counters.env_steps < self.td3.config.start_steps => {
                    [self.rng.random_range(-1.0..=1.0), self.rng.random_range(-1.0..=1.0)]
                }
                LowRole::Learn => self.td3.select_normalized(&low_obs, &mut self.rng, true)?,
                LowRole::Greedy => self.td3.select_normalized(&low_obs, &mut self.rng, false)?,
            };
            let action = action_from_normalized(u);
            let (next_obs, out) = env.step(action)?;
            tracker.tick();
            if roles.low == LowRole::Learn {
                self.td3.counters.env_steps += 1;
            }
            let d_min = env.min_obstacle_distance();
            let r_env = env_reward(out.kind, action.linear, action.angular, d_min);
            let collided = out.kind == OutcomeKind::Collision;
            let done = matches!(out.kind, OutcomeKind::GoalReached | OutcomeKind::Collision);
            let (r_low, next_low_obs) = match tracker.current() {
                Some(g) => {
                    let (theta, d_actual) = execution_terms(env.pose().position(), g);
                    let mut r = low_level_reward(
                        r_env,
                        direction_reward(theta)?,
                        distance_reward(d_actual, g.distance)?,
                        collided,
                        &self.setup.low_rewards,
                    );
                    let d_now = env.pose().position().distance(g.absolute_target);
                    r += hcfg.subgoal_progress_weight * (pose.position().distance(g.absolute_target) - d_now);
                    if d_now <= hcfg.subgoal_radius {
                        r += hcfg.subgoal_bonus;
                    }
                    (r, retarget(env, &next_obs, g).features(max_range))
                }
                None => (r_env, next_obs.features(max_range)),
            };
            if roles.low == LowRole::Learn {
                self.low_buffer.push(Transition {
                    obs: low_obs,
                    action: u,
                    reward: r_low,
                    next_obs: next_low_obs,
                    done,
                    steps: 1,
                })?;
            }
            record.reward_env += r_env;
            record.reward_low += r_low;
            record.steps.push(StepRecord {
                step: out.steps_elapsed,
                pose: env.pose(),
                linear: action.linear,
                angular: action.angular,
                d_min,
                outcome: out.kind,
                r_env,
                r_low,
                subgoal_id: open.as_ref().map(|o| o.id),
            });
            if roles.is_learning() {
                self.after_learning_step(roles, &mut losses)?;
            }
            obs = next_obs;
            if out.kind.is_terminal() {
                if let Some(o) = open.take() {
                    let k = tracker.steps_since_issue();
                    let next = obs.features(max_range);
                    self.close_subgoal(o, k, SubgoalEnd::Episode(out.kind), env, &obs, next, roles, &mut record)?;
                }
                record.outcome = out.kind;
                break;
            }
        }
        record.losses = losses.finish();
        if roles.is_learning() {
            self.counters.episodes += 1;
        }
        Ok(record)
    }

    #[allow(clippy::too_many_arguments)]
    fn close_subgoal(
        &mut self,
        open: OpenSubgoal,
        steps: usize,
        end: SubgoalEnd,
        env: &NavEnv,
        obs: &Observation,
        next_obs: Vec<f64>,
        roles: Roles,
        record: &mut EpisodeRecord,
    ) -> Result<(), TrainError> {
        let hcfg = &self.setup.hierarchy;
        let outcome = match end {
            SubgoalEnd::Episode(k) => k,
            SubgoalEnd::Status(_) => OutcomeKind::Running,
        };
        let collided = outcome == OutcomeKind::Collision;
        let ahead = obstacle_ahead(&obs.scan, env.config().fov(), hcfg.ahead_half_angle_deg, hcfg.ahead_range);
        let inputs = high_level_inputs(env.pose().position(), &open.subgoal, open.previous_bearing, ahead, collided);
        let mut reward = high_level_reward(&inputs, &self.setup.high_rewards)?;
        if hcfg.route_terminal_reward {
            reward += match outcome {
                OutcomeKind::GoalReached => GOAL_REWARD,
                OutcomeKind::Collision => COLLISION_REWARD,
                _ => 0.0,
            };
        }
        reward += hcfg.progress_weight * (open.goal_distance - obs.goal_distance);
        let done = matches!(outcome, OutcomeKind::GoalReached | OutcomeKind::Collision);
        if roles.high == HighRole::Learn {
            self.high_buffer.push(Transition {
                obs: open.obs.clone(),
                action: open.subgoal.index,
                reward,
                next_obs: next_obs.clone(),
                done,
                steps: steps as u32,
            })?;
        }
        record.reward_high += reward;
        record.subgoals.push(SubgoalRecord {
            id: open.id,
            action_index: open.subgoal.index,
            bearing_offset_deg: open.subgoal.bearing_offset,
            distance: open.subgoal.distance,
            target: open.subgoal.absolute_target,
            issued_at: open.subgoal.issued_at_step,
            ended_at: open.subgoal.issued_at_step + steps,
            end,
            theta_diff: inputs.theta_diff,
            d_actual: inputs.d_actual,
            r_high: reward,
            obs: open.obs,
            next_obs,
        });
        Ok(())
    }

    /// Counts a learning step and runs the gradient updates when the
    /// cadence is due.
    fn after_learning_step(&mut self, roles: Roles, losses: &mut LossAcc) -> Result<(), TrainError> {
        self.counters.env_steps += 1;
        let every = self.setup.schedule.update_every;
        if every == 0 || self.counters.env_steps % every != 0 {
            return Ok(());
        }
        self.counters.update_events += 1;
        if roles.low == LowRole::Learn && self.low_buffer.len() >= self.td3.config.batch_size {
            for _ in 0..self.setup.schedule.low_gradient_steps {
                let batch = self.low_buffer.sample(self.td3.config.batch_size, &mut self.rng)?;
                let l = self.td3.train_step(&batch, &mut self.rng)?;
                losses.c1.add(l.critic1);
                losses.c2.add(l.critic2);
                if let Some(a) = l.actor {
                    losses.actor.add(a);
                }
                self.counters.low_grad_steps += 1;
            }
        }
        if roles.high == HighRole::Learn {
            if let Some(dqn) = self.dqn.as_mut() {
                if self.high_buffer.len() >= dqn.config.batch_size {
                    for _ in 0..self.setup.schedule.high_gradient_steps {
                        let batch = self.high_buffer.sample(dqn.config.batch_size, &mut self.rng)?;
                        losses.q.add(dqn.train_step(&batch)?);
                        self.counters.high_grad_steps += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

fn retarget(env: &NavEnv, obs: &Observation, g: &Subgoal) -> Observation {
    let (d, b) = env.polar_to(g.absolute_target);
    obs.retargeted(d, b)
}

/// Deterministic per-episode seed stream.
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    // SplitMix64 finaliser over the pair.
    let mut z = base ^ episode.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
