//! Twin Delayed DDPG.
//!
//! The actor emits a normalised action `u ∈ [-1, 1]²` through a tanh head;
//! [`action_from_normalized`] maps it affinely onto the velocity bounds.
//! Critics take `[obs, u]`. Exploration noise and target-policy smoothing
//! are applied in the normalised space.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{obs_matrix, stack_rows, AgentError};
use crate::neuralnet::{mlp, Activation, AdamConfig, AdamState, Checkpoint, Network};
use crate::replay::Transition;
use crate::simworld::{Action, MAX_ANGULAR, MAX_LINEAR};

pub const ACTION_DIM: usize = 2;

/// `u0 ∈ [-1, 1] → linear ∈ [0, 1]`, `u1 ∈ [-1, 1] → angular ∈ [-1, 1]`.
pub fn action_from_normalized(u: [f64; 2]) -> Action {
    let u0 = u[0].clamp(-1.0, 1.0);
    let u1 = u[1].clamp(-1.0, 1.0);
    Action::new(0.5 * (u0 + 1.0) * MAX_LINEAR, u1 * MAX_ANGULAR)
}

pub fn normalized_from_action(a: Action) -> [f64; 2] {
    let a = a.clamped();
    [2.0 * a.linear / MAX_LINEAR - 1.0, a.angular / MAX_ANGULAR]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Std-dev of Gaussian exploration noise (normalised action units).
    pub expl_noise: f64,
    /// Std-dev of target policy smoothing noise.
    pub target_noise: f64,
    pub noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps with uniformly random actions before the actor is used.
    pub start_steps: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            expl_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            batch_size: 64,
            buffer_capacity: 100_000,
            start_steps: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Td3Counters {
    pub critic_updates: u64,
    pub actor_updates: u64,
    pub env_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3Losses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Td3Agent {
    pub config: Td3Config,
    pub actor: Network,
    pub actor_target: Network,
    pub critic1: Network,
    pub critic2: Network,
    pub critic1_target: Network,
    pub critic2_target: Network,
    pub actor_adam: AdamState,
    pub critic1_adam: AdamState,
    pub critic2_adam: AdamState,
    pub counters: Td3Counters,
}

impl Td3Agent {
    pub fn new(obs_dim: usize, config: Td3Config, seed: u64) -> Result<Self, AgentError> {
        if config.policy_delay == 0 {
            return Err(AgentError::Config("policy_delay must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&config.tau) {
            return Err(AgentError::Config(format!("tau {} outside [0, 1]", config.tau)));
        }
        let actor = mlp(obs_dim, &config.actor_hidden, ACTION_DIM, Activation::Relu, Activation::Tanh, seed)?;
        // Distinct seeds keep the twin critics independently initialised.
        let critic1 = mlp(obs_dim + ACTION_DIM, &config.critic_hidden, 1, Activation::Relu, Activation::Linear, seed.wrapping_add(1))?;
        let critic2 = mlp(obs_dim + ACTION_DIM, &config.critic_hidden, 1, Activation::Relu, Activation::Linear, seed.wrapping_add(2))?;
        Self::from_networks(actor, critic1, critic2, config)
    }

    /// Wraps explicit networks; targets start as copies.
    pub fn from_networks(actor: Network, critic1: Network, critic2: Network, config: Td3Config) -> Result<Self, AgentError> {
        if actor.output_dim() != ACTION_DIM {
            return Err(AgentError::Config("actor must output two values".into()));
        }
        if critic1.architecture() != critic2.architecture() {
            return Err(AgentError::Config("twin critics must share an architecture".into()));
        }
        if critic1.input_dim() != actor.input_dim() + ACTION_DIM || critic1.output_dim() != 1 {
            return Err(AgentError::Config("critic must map [obs, action] to a scalar".into()));
        }
        let actor_adam = AdamState::new(&actor, AdamConfig { lr: config.actor_lr, ..AdamConfig::default() });
        let critic_cfg = AdamConfig { lr: config.critic_lr, ..AdamConfig::default() };
        let critic1_adam = AdamState::new(&critic1, critic_cfg);
        let critic2_adam = AdamState::new(&critic2, critic_cfg);
        Ok(Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            actor_adam,
            critic1_adam,
            critic2_adam,
            counters: Td3Counters::default(),
            config,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    /// Deterministic actor output in normalised space.
    pub fn policy(&self, obs: &[f64]) -> Result<[f64; 2], AgentError> {
        let out = self.actor.forward(obs)?;
        Ok([out[0], out[1]])
    }

    /// Normalised action, with clipped Gaussian exploration when `explore`.
    pub fn select_normalized<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R, explore: bool) -> Result<[f64; 2], AgentError> {
        let mut u = self.policy(obs)?;
        if explore && self.config.expl_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.expl_noise).map_err(|e| AgentError::Config(e.to_string()))?;
            for v in &mut u {
                *v += noise.sample(rng);
            }
        }
        Ok([u[0].clamp(-1.0, 1.0), u[1].clamp(-1.0, 1.0)])
    }

    pub fn select_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R, explore: bool) -> Result<Action, AgentError> {
        Ok(action_from_normalized(self.select_normalized(obs, rng, explore)?))
    }

    /// Clipped smoothing noise for `n` target actions.
    pub fn smoothing_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<[f64; 2]>, AgentError> {
        if self.config.target_noise <= 0.0 {
            return Ok(vec![[0.0; 2]; n]);
        }
        let normal = Normal::new(0.0, self.config.target_noise).map_err(|e| AgentError::Config(e.to_string()))?;
        let c = self.config.noise_clip;
        Ok((0..n)
            .map(|_| [normal.sample(rng).clamp(-c, c), normal.sample(rng).clamp(-c, c)])
            .collect())
    }

    /// Target-critic values `(Q1', Q2')` at `(s', clip(actor'(s') + noise))`.
    pub fn target_q_pair(&self, batch: &[&Transition<[f64; 2]>], noise: &[[f64; 2]]) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let next = obs_matrix(batch, true);
        let mut next_actions = self.actor_target.forward_batch(next.view())?;
        for (mut row, n) in next_actions.rows_mut().into_iter().zip(noise) {
            row[0] = (row[0] + n[0]).clamp(-1.0, 1.0);
            row[1] = (row[1] + n[1]).clamp(-1.0, 1.0);
        }
        let input = concat_cols(&next, &next_actions);
        let q1 = self.critic1_target.forward_batch(input.view())?;
        let q2 = self.critic2_target.forward_batch(input.view())?;
        Ok((q1.column(0).to_vec(), q2.column(0).to_vec()))
    }

    /// Clipped double-Q targets `r + gamma^steps (1 - done) min(Q1', Q2')`.
    pub fn critic_targets(&self, batch: &[&Transition<[f64; 2]>], noise: &[[f64; 2]]) -> Result<Vec<f64>, AgentError> {
        let (q1, q2) = self.target_q_pair(batch, noise)?;
        Ok(batch
            .iter()
            .zip(q1.iter().zip(&q2))
            .map(|(t, (a, b))| bootstrap(t, self.config.gamma, a.min(*b)))
            .collect())
    }

    /// Regresses both critics toward shared clipped double-Q targets.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &[&Transition<[f64; 2]>], rng: &mut R) -> Result<(f64, f64), AgentError> {
        let noise = self.smoothing_noise(batch.len(), rng)?;
        self.critic_update_with_noise(batch, &noise)
    }

    pub fn critic_update_with_noise(&mut self, batch: &[&Transition<[f64; 2]>], noise: &[[f64; 2]]) -> Result<(f64, f64), AgentError> {
        let targets = self.critic_targets(batch, noise)?;
        let obs = obs_matrix(batch, false);
        let actions = stack_rows(batch.iter().map(|t| t.action.as_slice()), ACTION_DIM);
        let input = concat_cols(&obs, &actions);
        let l1 = regress(&mut self.critic1, &mut self.critic1_adam, &input, &targets)?;
        let l2 = regress(&mut self.critic2, &mut self.critic2_adam, &input, &targets)?;
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(AgentError::NonFinite(format!(
                "critic losses ({l1}, {l2}) at critic update {}",
                self.counters.critic_updates
            )));
        }
        self.counters.critic_updates += 1;
        Ok((l1, l2))
    }

    /// True when the delayed actor update is owed.
    pub fn actor_due(&self) -> bool {
        self.counters.actor_updates < self.counters.critic_updates / self.config.policy_delay
    }

    /// Deterministic policy gradient step on `-mean Q1(s, actor(s))`, then
    /// soft updates of the actor and both critic targets.
    pub fn actor_update(&mut self, batch: &[&Transition<[f64; 2]>]) -> Result<f64, AgentError> {
        if !self.actor_due() {
            return Err(AgentError::Schedule(format!(
                "actor update requested after {} critic updates with {} actor updates and delay {}",
                self.counters.critic_updates, self.counters.actor_updates, self.config.policy_delay
            )));
        }
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let obs = obs_matrix(batch, false);
        let n = batch.len() as f64;
        let actor_cache = self.actor.forward_train(obs.clone())?;
        let input = concat_cols(&obs, actor_cache.output());
        let critic_cache = self.critic1.forward_train(input)?;
        let loss = -critic_cache.output().sum() / n;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite(format!("actor loss {loss} at actor update {}", self.counters.actor_updates)));
        }
        let dq = Array2::from_elem((batch.len(), 1), -1.0 / n);
        let (_, d_input) = self.critic1.backward(&critic_cache, dq.view())?;
        let obs_dim = self.obs_dim();
        let d_action = d_input.slice(s![.., obs_dim..]).to_owned();
        let (grads, _) = self.actor.backward(&actor_cache, d_action.view())?;
        self.actor_adam.step(&mut self.actor, &grads)?;
        self.counters.actor_updates += 1;
        let tau = self.config.tau;
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic1_target.soft_update_from(&self.critic1, tau)?;
        self.critic2_target.soft_update_from(&self.critic2, tau)?;
        Ok(loss)
    }

    /// Critic update followed by the actor update when it is due.
    pub fn train_step<R: Rng + ?Sized>(&mut self, batch: &[&Transition<[f64; 2]>], rng: &mut R) -> Result<Td3Losses, AgentError> {
        let (critic1, critic2) = self.critic_update(batch, rng)?;
        let actor = if self.actor_due() { Some(self.actor_update(batch)?) } else { None };
        Ok(Td3Losses { critic1, critic2, actor })
    }

    pub fn write_checkpoint(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.push(&format!("{prefix}actor"), &self.actor, Some(&self.actor_adam));
        ck.push(&format!("{prefix}actor_target"), &self.actor_target, None);
        ck.push(&format!("{prefix}critic1"), &self.critic1, Some(&self.critic1_adam));
        ck.push(&format!("{prefix}critic2"), &self.critic2, Some(&self.critic2_adam));
        ck.push(&format!("{prefix}critic1_target"), &self.critic1_target, None);
        ck.push(&format!("{prefix}critic2_target"), &self.critic2_target, None);
    }

    pub fn read_checkpoint(ck: &Checkpoint, prefix: &str, config: Td3Config, counters: Td3Counters) -> Result<Self, AgentError> {
        let get = |name: &str| ck.get(&format!("{prefix}{name}"));
        let actor = get("actor")?;
        let c1 = get("critic1")?;
        let c2 = get("critic2")?;
        let mut agent = Self::from_networks(actor.network.clone(), c1.network.clone(), c2.network.clone(), config)?;
        agent.actor_target = get("actor_target")?.network.clone();
        agent.critic1_target = get("critic1_target")?.network.clone();
        agent.critic2_target = get("critic2_target")?.network.clone();
        if agent.actor_target.architecture() != agent.actor.architecture()
            || agent.critic1_target.architecture() != agent.critic1.architecture()
            || agent.critic2_target.architecture() != agent.critic2.architecture()
        {
            return Err(AgentError::Config("target network architecture mismatch in checkpoint".into()));
        }
        for (slot, entry) in [(&mut agent.actor_adam, actor), (&mut agent.critic1_adam, c1), (&mut agent.critic2_adam, c2)] {
            if let Some(adam) = &entry.adam {
                *slot = adam.clone();
            }
        }
        agent.counters = counters;
        Ok(agent)
    }
}

fn bootstrap<A>(t: &Transition<A>, gamma: f64, next_value: f64) -> f64 {
    if t.done {
        t.reward
    } else {
        t.reward + gamma.powi(t.steps as i32) * next_value
    }
}

fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("row counts agree")
}

fn regress(net: &mut Network, adam: &mut AdamState, input: &Array2<f64>, targets: &[f64]) -> Result<f64, AgentError> {
    let cache = net.forward_train(input.clone())?;
    let pred = cache.output();
    let n = targets.len() as f64;
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for (i, y) in targets.iter().enumerate() {
        let d = pred[[i, 0]] - y;
        loss += d * d / n;
        grad[[i, 0]] = 2.0 * d / n;
    }
    if !loss.is_finite() {
        return Ok(loss);
    }
    let (grads, _) = net.backward(&cache, grad.view())?;
    adam.step(net, &grads)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_action_map() {
        assert_eq!(action_from_normalized([0.0, 0.0]), Action::new(0.5, 0.0));
        assert_eq!(action_from_normalized([-1.0, 1.0]), Action::new(0.0, 1.0));
        assert_eq!(action_from_normalized([5.0, -5.0]), Action::new(1.0, -1.0));
        assert_eq!(normalized_from_action(Action::new(0.5, 0.25)), [0.0, 0.25]);
    }

    #[test]
    fn rejects_zero_policy_delay() {
        let cfg = Td3Config { policy_delay: 0, ..Td3Config::default() };
        assert!(Td3Agent::new(4, cfg, 0).is_err());
    }
}
