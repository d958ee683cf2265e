//! Deep Q-learning with a target network and epsilon-greedy exploration.
//!
//! The bootstrap discount is `gamma^steps`, so transitions spanning several
//! environment ticks (a subgoal lifetime) are discounted semi-Markov style.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{obs_matrix, AgentError};
use crate::neuralnet::{mlp, Activation, AdamConfig, AdamState, Checkpoint, Network};
use crate::replay::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSync {
    /// Copy the online network every `every` gradient steps.
    Hard { every: u64 },
    /// Polyak-average after every gradient step.
    Soft { tau: f64 },
}

/// Linear decay from `start` to `end` over `decay_steps` schedule ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_steps: 1000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub target_sync: TargetSync,
    pub batch_size: usize,
    pub buffer_capacity: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            lr: 1e-3,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
            target_sync: TargetSync::Hard { every: 1000 },
            batch_size: 32,
            buffer_capacity: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DqnCounters {
    pub grad_steps: u64,
    pub schedule_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub q_net: Network,
    pub q_target: Network,
    pub adam: AdamState,
    pub counters: DqnCounters,
    /// When set, overrides the scheduled epsilon.
    pub epsilon_override: Option<f64>,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, n_actions: usize, config: DqnConfig, seed: u64) -> Result<Self, AgentError> {
        if !(0.0..1.0).contains(&config.gamma) {
            return Err(AgentError::Config(format!("gamma {} outside [0, 1)", config.gamma)));
        }
        if n_actions == 0 {
            return Err(AgentError::Config("DQN needs at least one action".into()));
        }
        let q_net = mlp(obs_dim, &config.hidden, n_actions, Activation::Relu, Activation::Linear, seed)?;
        let q_target = q_net.clone();
        let adam = AdamState::new(&q_net, AdamConfig { lr: config.lr, ..AdamConfig::default() });
        Ok(Self { config, q_net, q_target, adam, counters: DqnCounters::default(), epsilon_override: None })
    }

    /// Wraps explicit networks, e.g. hand-set fixtures.
    pub fn from_networks(q_net: Network, q_target: Network, config: DqnConfig) -> Result<Self, AgentError> {
        if q_net.architecture() != q_target.architecture() {
            return Err(AgentError::Config("online and target Q architectures differ".into()));
        }
        let adam = AdamState::new(&q_net, AdamConfig { lr: config.lr, ..AdamConfig::default() });
        Ok(Self { config, q_net, q_target, adam, counters: DqnCounters::default(), epsilon_override: None })
    }

    pub fn n_actions(&self) -> usize {
        self.q_net.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.q_net.input_dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_override.unwrap_or_else(|| self.config.epsilon.value(self.counters.schedule_step))
    }

    pub fn advance_schedule(&mut self) {
        self.counters.schedule_step += 1;
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.q_net.forward(obs)?)
    }

    /// Epsilon-greedy choice; `greedy` skips exploration. Ties go to the
    /// lowest index.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R, greedy: bool) -> Result<usize, AgentError> {
        let q = self.q_values(obs)?;
        if !greedy && rng.random::<f64>() < self.epsilon() {
            return Ok(rng.random_range(0..q.len()));
        }
        Ok(argmax(&q))
    }

    /// `y = r + gamma^steps * (1 - done) * max_a' Q_target(s', a')`.
    pub fn bellman_targets(&self, batch: &[&Transition<usize>]) -> Result<Vec<f64>, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let next_q = self.q_target.forward_batch(obs_matrix(batch, true).view())?;
        Ok(batch
            .iter()
            .zip(next_q.rows())
            .map(|(t, row)| {
                if t.done {
                    t.reward
                } else {
                    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    t.reward + self.config.gamma.powi(t.steps as i32) * best
                }
            })
            .collect())
    }

    /// One gradient step on the squared TD error of the taken actions.
    /// Returns the batch loss.
    pub fn train_step(&mut self, batch: &[&Transition<usize>]) -> Result<f64, AgentError> {
        let targets = self.bellman_targets(batch)?;
        let n = batch.len() as f64;
        let cache = self.q_net.forward_train(obs_matrix(batch, false))?;
        let q = cache.output();
        let mut grad = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, (t, y)) in batch.iter().zip(&targets).enumerate() {
            if t.action >= q.ncols() {
                return Err(AgentError::Config(format!("action {} out of range", t.action)));
            }
            let d = q[[i, t.action]] - y;
            loss += d * d / n;
            grad[[i, t.action]] = 2.0 * d / n;
        }
        if !loss.is_finite() {
            return Err(AgentError::NonFinite(format!(
                "DQN loss {loss} at gradient step {} (targets finite: {})",
                self.counters.grad_steps,
                targets.iter().all(|v| v.is_finite())
            )));
        }
        let (grads, _) = self.q_net.backward(&cache, grad.view())?;
        self.adam.step(&mut self.q_net, &grads)?;
        self.counters.grad_steps += 1;
        match self.config.target_sync {
            TargetSync::Hard { every } => {
                if every > 0 && self.counters.grad_steps % every == 0 {
                    self.q_target.clone_from(&self.q_net);
                }
            }
            TargetSync::Soft { tau } => self.q_target.soft_update_from(&self.q_net, tau)?,
        }
        Ok(loss)
    }

    pub fn write_checkpoint(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.push(&format!("{prefix}q_net"), &self.q_net, Some(&self.adam));
        ck.push(&format!("{prefix}q_target"), &self.q_target, None);
    }

    pub fn read_checkpoint(
        ck: &Checkpoint,
        prefix: &str,
        config: DqnConfig,
        counters: DqnCounters,
    ) -> Result<Self, AgentError> {
        let online = ck.get(&format!("{prefix}q_net"))?;
        let target = ck.get(&format!("{prefix}q_target"))?;
        let mut agent = Self::from_networks(online.network.clone(), target.network.clone(), config)?;
        if let Some(adam) = &online.adam {
            agent.adam = adam.clone();
        }
        agent.counters = counters;
        Ok(agent)
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
