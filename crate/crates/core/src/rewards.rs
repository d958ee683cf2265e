//! Two-level reward structure.
//!
//! The high-level (subgoal-selecting) agent is scored once per subgoal
//! lifetime with a weighted sum of direction, distance, avoidance and
//! smoothness terms minus collision and time penalties. The low-level
//! controller receives the environment reward plus the subgoal-tracking
//! terms, measured against the current subgoal. Angles here are degrees.

use crate::simworld::OutcomeKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("angle difference {0} deg is outside [-180, 180]")]
    AngleOutOfRange(f64),
    #[error("target distance must be > 0, got {0}")]
    NonPositiveTarget(f64),
    #[error("travelled distance must be >= 0, got {0}")]
    NegativeDistance(f64),
    #[error("proximity argument must be >= 0, got {0}")]
    NegativeProximity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighRewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub r_avoidance: f64,
    pub p_collision: f64,
    pub p_time: f64,
}

impl Default for HighRewardWeights {
    fn default() -> Self {
        Self { w1: 0.4, w2: 0.4, w3: 0.1, w4: 0.1, r_avoidance: 0.2, p_collision: 1.0, p_time: 0.01 }
    }
}

impl HighRewardWeights {
    pub fn zero() -> Self {
        Self { w1: 0.0, w2: 0.0, w3: 0.0, w4: 0.0, r_avoidance: 0.0, p_collision: 0.0, p_time: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowRewardWeights {
    pub w7: f64,
    pub w8: f64,
    /// Collision penalty scaled by `w8`.
    pub p_collision: f64,
}

impl Default for LowRewardWeights {
    fn default() -> Self {
        Self { w7: 1.0, w8: 1.0, p_collision: 1.0 }
    }
}

/// Measurements feeding the high-level reward for one subgoal lifetime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighRewardInputs {
    /// Actual minus intended direction, degrees in `[-180, 180]`.
    pub theta_diff: f64,
    pub d_actual: f64,
    pub d_target: f64,
    pub obstacle_ahead: bool,
    /// Direction change between consecutive subgoals, degrees.
    pub delta_theta: f64,
    pub collided: bool,
}

/// Per-component breakdown of one high-level reward evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighRewardTerms {
    pub direction: f64,
    pub distance: f64,
    pub avoidance: f64,
    pub smoothness: f64,
    pub collision_penalty: f64,
    pub time_penalty: f64,
    pub total: f64,
}

pub fn direction_reward(theta_diff: f64) -> Result<f64, RewardError> {
    if !(-180.0..=180.0).contains(&theta_diff) {
        return Err(RewardError::AngleOutOfRange(theta_diff));
    }
    Ok(1.0 - theta_diff.abs() / 180.0)
}

pub fn distance_reward(d_actual: f64, d_target: f64) -> Result<f64, RewardError> {
    if !(d_target > 0.0) {
        return Err(RewardError::NonPositiveTarget(d_target));
    }
    if !(d_actual >= 0.0) {
        return Err(RewardError::NegativeDistance(d_actual));
    }
    Ok(1.0 - ((d_actual - d_target).abs() / d_target).min(1.0))
}

pub fn avoidance_reward(obstacle_ahead: bool, r_avoidance: f64) -> f64 {
    if obstacle_ahead {
        0.0
    } else {
        r_avoidance
    }
}

pub fn smoothness_reward(delta_theta: f64) -> f64 {
    0.1 * (1.0 - (delta_theta.abs() / 90.0).min(1.0))
}

pub fn high_level_terms(
    inputs: &HighRewardInputs,
    weights: &HighRewardWeights,
) -> Result<HighRewardTerms, RewardError> {
    let direction = direction_reward(inputs.theta_diff)?;
    let distance = distance_reward(inputs.d_actual, inputs.d_target)?;
    let avoidance = avoidance_reward(inputs.obstacle_ahead, weights.r_avoidance);
    let smoothness = smoothness_reward(inputs.delta_theta);
    let collision_penalty = if inputs.collided { weights.p_collision } else { 0.0 };
    let time_penalty = weights.p_time;
    let total = weights.w1 * direction + weights.w2 * distance + weights.w3 * avoidance
        + weights.w4 * smoothness
        - collision_penalty
        - time_penalty;
    Ok(HighRewardTerms {
        direction,
        distance,
        avoidance,
        smoothness,
        collision_penalty,
        time_penalty,
        total,
    })
}

pub fn high_level_reward(inputs: &HighRewardInputs, weights: &HighRewardWeights) -> Result<f64, RewardError> {
    high_level_terms(inputs, weights).map(|t| t.total)
}

/// Obstacle proximity cost `r(x)`: `1 - x` below one metre, zero beyond.
pub fn proximity_shaping(x: f64) -> Result<f64, RewardError> {
    if !(x >= 0.0) {
        return Err(RewardError::NegativeProximity(x));
    }
    Ok(if x < 1.0 { 1.0 - x } else { 0.0 })
}

pub const GOAL_REWARD: f64 = 100.0;
pub const COLLISION_REWARD: f64 = -100.0;

/// Environment reward for one control step.
pub fn env_reward(outcome: OutcomeKind, a_lin: f64, a_ang: f64, d_min: f64) -> f64 {
    match outcome {
        OutcomeKind::GoalReached => GOAL_REWARD,
        OutcomeKind::Collision => COLLISION_REWARD,
        OutcomeKind::Running | OutcomeKind::Timeout => {
            // d_min is a clearance and never negative.
            let r = if d_min < 1.0 { 1.0 - d_min.max(0.0) } else { 0.0 };
            a_lin / 2.0 - a_ang.abs() / 2.0 - r / 2.0
        }
    }
}

pub fn low_level_reward(env_r: f64, r_dir: f64, r_dist: f64, collided: bool, weights: &LowRewardWeights) -> f64 {
    let penalty = if collided { weights.p_collision } else { 0.0 };
    env_r + weights.w7 * (r_dir + r_dist) - weights.w8 * penalty
}
