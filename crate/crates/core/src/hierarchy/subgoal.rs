use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewards::HighRewardInputs;
use crate::simworld::{beam_offsets, wrap_angle, wrap_degrees, Aabb, Point2, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("subgoal index {index} out of range for {n_actions} actions")]
    IndexOutOfRange { index: usize, n_actions: usize },
    #[error("invalid hierarchy configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Both levels learn from the first episode.
    Joint,
    /// Pretrain the controller on random subgoals, then train the planner
    /// with the controller frozen, then fine-tune both.
    Alternating,
    /// Only the low-level controller learns.
    FrozenHigh,
    /// Only the high-level planner learns.
    FrozenLow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub n_bearings: usize,
    /// Ascending subgoal distances in metres.
    pub distance_bins: Vec<f64>,
    /// Low-level steps before an unreached subgoal expires.
    pub horizon: usize,
    pub subgoal_radius: f64,
    pub training_mode: TrainingMode,
    /// Half-width of the forward cone checked for obstacles (degrees).
    pub ahead_half_angle_deg: f64,
    /// A beam in the cone shorter than this counts as an obstacle ahead.
    pub ahead_range: f64,
    /// Adds the environment's terminal reward (goal or collision) to the
    /// high-level transition that ends the episode.
    pub route_terminal_reward: bool,
    /// Weight on metres of progress toward the final goal per subgoal.
    pub progress_weight: f64,
    /// Added to the controller's reward on the tick that reaches a subgoal.
    pub subgoal_bonus: f64,
    /// Weight on metres of progress toward the active subgoal per tick,
    /// added to the controller's reward.
    pub subgoal_progress_weight: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            n_bearings: 8,
            distance_bins: vec![1.0, 2.0],
            horizon: 50,
            subgoal_radius: 0.3,
            training_mode: TrainingMode::Alternating,
            ahead_half_angle_deg: 15.0,
            ahead_range: 1.0,
            route_terminal_reward: true,
            progress_weight: 0.0,
            subgoal_bonus: 0.0,
            subgoal_progress_weight: 0.0,
        }
    }
}

impl HierarchyConfig {
    pub fn n_actions(&self) -> usize {
        self.n_bearings * self.distance_bins.len()
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.n_bearings < 2 {
            return Err(HierarchyError::Config("n_bearings must be >= 2".into()));
        }
        if self.horizon == 0 {
            return Err(HierarchyError::Config("horizon must be >= 1".into()));
        }
        if self.distance_bins.is_empty()
            || self.distance_bins.iter().any(|d| !(*d > 0.0))
            || self.distance_bins.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(HierarchyError::Config("distance_bins must be positive and strictly ascending".into()));
        }
        if !(self.subgoal_radius > 0.0) {
            return Err(HierarchyError::Config("subgoal_radius must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgoal {
    pub index: usize,
    /// Degrees relative to the heading at issuance.
    pub bearing_offset: f64,
    pub distance: f64,
    /// Absolute direction of the subgoal (radians).
    pub absolute_bearing: f64,
    pub origin: Point2,
    pub absolute_target: Point2,
    pub issued_at_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubgoalStatus {
    Active,
    Reached,
    Expired,
}

/// Maps a discrete action to a subgoal: `index / n_distances` selects the
/// bearing `-180 + b·360/n_bearings` degrees, `index % n_distances` the
/// distance bin. The target is clamped into `bounds`.
pub fn subgoal_decode(
    index: usize,
    pose: &Pose,
    bounds: &Aabb,
    config: &HierarchyConfig,
    step: usize,
) -> Result<Subgoal, HierarchyError> {
    let n_actions = config.n_actions();
    if index >= n_actions {
        return Err(HierarchyError::IndexOutOfRange { index, n_actions });
    }
    let n_dist = config.distance_bins.len();
    let (b, d) = (index / n_dist, index % n_dist);
    let bearing_offset = -180.0 + b as f64 * (360.0 / config.n_bearings as f64);
    let distance = config.distance_bins[d];
    let absolute_bearing = wrap_angle(pose.heading + bearing_offset.to_radians());
    let origin = pose.position();
    let absolute_target = bounds.clamp(origin.offset_polar(absolute_bearing, distance));
    Ok(Subgoal { index, bearing_offset, distance, absolute_bearing, origin, absolute_target, issued_at_step: step })
}

pub fn subgoal_status(pose: &Pose, subgoal: &Subgoal, steps_since_issue: usize, config: &HierarchyConfig) -> SubgoalStatus {
    if pose.position().distance(subgoal.absolute_target) <= config.subgoal_radius {
        SubgoalStatus::Reached
    } else if steps_since_issue >= config.horizon {
        SubgoalStatus::Expired
    } else {
        SubgoalStatus::Active
    }
}

/// True when a beam within `half_angle_deg` of the heading reads below `range`.
pub fn obstacle_ahead(scan: &[f64], fov: f64, half_angle_deg: f64, range: f64) -> bool {
    let half = half_angle_deg.to_radians() + 1e-12;
    beam_offsets(scan.len(), fov)
        .iter()
        .zip(scan)
        .any(|(off, r)| off.abs() <= half && *r < range)
}

/// Direction and distance terms of a (partial) subgoal execution that
/// started at `subgoal.origin` and is currently at `position`.
/// A zero displacement scores the worst direction, 180 degrees.
pub fn execution_terms(position: Point2, subgoal: &Subgoal) -> (f64, f64) {
    let d_actual = position.distance(subgoal.origin);
    let theta_diff = if d_actual < 1e-12 {
        180.0
    } else {
        wrap_degrees((subgoal.origin.angle_to(position) - subgoal.absolute_bearing).to_degrees())
    };
    (theta_diff, d_actual)
}

/// Builds the high-level reward inputs for a finished subgoal.
/// `previous_bearing` is the absolute bearing of the preceding subgoal, or
/// the heading at the first issuance.
pub fn high_level_inputs(
    end: Point2,
    subgoal: &Subgoal,
    previous_bearing: f64,
    obstacle_ahead: bool,
    collided: bool,
) -> HighRewardInputs {
    let (theta_diff, d_actual) = execution_terms(end, subgoal);
    HighRewardInputs {
        theta_diff,
        d_actual,
        d_target: subgoal.distance,
        obstacle_ahead,
        delta_theta: wrap_degrees((subgoal.absolute_bearing - previous_bearing).to_degrees()),
        collided,
    }
}

/// Tracks the active subgoal across low-level ticks.
#[derive(Debug, Clone, Default)]
pub struct SubgoalTracker {
    current: Option<Subgoal>,
    steps_since_issue: usize,
    previous_bearing: Option<f64>,
    issued: usize,
}

impl SubgoalTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> Option<&Subgoal> {
        self.current.as_ref()
    }

    pub fn steps_since_issue(&self) -> usize {
        self.steps_since_issue
    }

    pub fn issued(&self) -> usize {
        self.issued
    }

    pub fn status(&self, pose: &Pose, config: &HierarchyConfig) -> Option<SubgoalStatus> {
        self.current.as_ref().map(|g| subgoal_status(pose, g, self.steps_since_issue, config))
    }

    /// A new subgoal is needed at the start and whenever the active one is
    /// reached or expired.
    pub fn needs_decision(&self, pose: &Pose, config: &HierarchyConfig) -> bool {
        !matches!(self.status(pose, config), Some(SubgoalStatus::Active))
    }

    /// Bearing the next subgoal's direction change is measured against.
    pub fn reference_bearing(&self, pose: &Pose) -> f64 {
        self.previous_bearing.unwrap_or(pose.heading)
    }

    pub fn issue(&mut self, subgoal: Subgoal) {
        if let Some(old) = self.current.take() {
            self.previous_bearing = Some(old.absolute_bearing);
        }
        self.current = Some(subgoal);
        self.steps_since_issue = 0;
        self.issued += 1;
    }

    pub fn tick(&mut self) {
        self.steps_since_issue += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arena() -> Aabb {
        Aabb::new(Point2::new(-10.0, -10.0), Point2::new(10.0, 10.0))
    }

    #[test]
    fn decode_examples() {
        let cfg = HierarchyConfig::default();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let g = subgoal_decode(0, &pose, &arena(), &cfg, 0).unwrap();
        assert_eq!(g.bearing_offset, -180.0);
        assert_eq!(g.distance, 1.0);
        let g = subgoal_decode(8, &pose, &arena(), &cfg, 0).unwrap();
        assert_eq!(g.bearing_offset, 0.0);
        assert_eq!(g.absolute_target, Point2::new(1.0, 0.0));
        assert_eq!(
            subgoal_decode(16, &pose, &arena(), &cfg, 0),
            Err(HierarchyError::IndexOutOfRange { index: 16, n_actions: 16 })
        );
    }

    #[test]
    fn decode_clamps_into_bounds() {
        let cfg = HierarchyConfig::default();
        let b = Aabb::new(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0));
        let g = subgoal_decode(9, &Pose::new(1.5, 1.0, 0.0), &b, &cfg, 0).unwrap();
        assert_eq!(g.absolute_target, Point2::new(2.0, 1.0));
    }

    #[test]
    fn status_examples() {
        let cfg = HierarchyConfig::default();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let g = subgoal_decode(9, &pose, &arena(), &cfg, 0).unwrap();
        assert_eq!(subgoal_status(&Pose::new(2.0, 0.0, 0.0), &g, 3, &cfg), SubgoalStatus::Reached);
        assert_eq!(subgoal_status(&pose, &g, cfg.horizon, &cfg), SubgoalStatus::Expired);
        assert_eq!(subgoal_status(&Pose::new(1.0, 0.0, 0.0), &g, 1, &cfg), SubgoalStatus::Active);
    }

    #[test]
    fn config_validation() {
        let mut cfg = HierarchyConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.distance_bins = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        let cfg = HierarchyConfig { n_bearings: 1, ..HierarchyConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
