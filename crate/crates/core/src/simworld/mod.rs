//! Deterministic 2D differential-drive navigation environment.
//!
//! The robot is a disk driven by unicycle kinematics with Euler integration.
//! A planar range scanner casts `n_beams` rays over a forward field of view.
//! Boundary walls are obstacles. Episodes end on goal arrival, collision,
//! or after `max_steps` control steps.

mod geometry;
mod world;

pub use geometry::{wrap_angle, wrap_degrees, Aabb, Point2, Shape};
pub use world::{load_world, World, WorldError, WORLD_FORMAT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Smallest range a beam reports, keeping every reading strictly positive.
pub const MIN_RANGE: f64 = 1e-6;

pub const MAX_LINEAR: f64 = 1.0;
pub const MAX_ANGULAR: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("step called on a finished episode ({0:?}); call reset first")]
    EpisodeFinished(OutcomeKind),
    #[error("invalid dt {0}")]
    InvalidDt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-π, π]`.
    pub heading: f64,
}

impl Pose {
    /// Builds a pose, wrapping the heading into `(-π, π]`.
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Velocity command: linear m/s in `[0, 1]`, angular rad/s in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub linear: f64,
    pub angular: f64,
}

impl Action {
    pub const fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }

    pub fn clamped(self) -> Action {
        let fix = |v: f64| if v.is_nan() { 0.0 } else { v };
        Action {
            linear: fix(self.linear).clamp(0.0, MAX_LINEAR),
            angular: fix(self.angular).clamp(-MAX_ANGULAR, MAX_ANGULAR),
        }
    }

    pub fn in_bounds(&self) -> bool {
        (0.0..=MAX_LINEAR).contains(&self.linear) && (-MAX_ANGULAR..=MAX_ANGULAR).contains(&self.angular)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scan: Vec<f64>,
    pub goal_distance: f64,
    /// Relative to the robot heading, in `(-π, π]`.
    pub goal_bearing: f64,
    pub last_action: Action,
}

impl Observation {
    /// Raw values: scan, goal distance, goal bearing, linear, angular.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.scan.len() + 4);
        v.extend_from_slice(&self.scan);
        v.extend_from_slice(&[
            self.goal_distance,
            self.goal_bearing,
            self.last_action.linear,
            self.last_action.angular,
        ]);
        v
    }

    /// Network input: ranges and distance divided by `max_range`, bearing
    /// divided by π, last action unchanged.
    pub fn features(&self, max_range: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.scan.len() + 4);
        v.extend(self.scan.iter().map(|r| r / max_range));
        v.extend_from_slice(&[
            self.goal_distance / max_range,
            self.goal_bearing / PI,
            self.last_action.linear,
            self.last_action.angular,
        ]);
        v
    }

    /// Copy with the goal fields replaced by another target's polar coordinates.
    pub fn retargeted(&self, distance: f64, bearing: f64) -> Observation {
        Observation {
            scan: self.scan.clone(),
            goal_distance: distance,
            goal_bearing: bearing,
            last_action: self.last_action,
        }
    }

    pub fn min_range(&self) -> f64 {
        self.scan.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    Running,
    GoalReached,
    Collision,
    Timeout,
}

impl OutcomeKind {
    pub fn is_terminal(self) -> bool {
        self != OutcomeKind::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Running => "running",
            OutcomeKind::GoalReached => "goal",
            OutcomeKind::Collision => "collision",
            OutcomeKind::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<OutcomeKind> {
        Some(match s {
            "running" => OutcomeKind::Running,
            "goal" => OutcomeKind::GoalReached,
            "collision" => OutcomeKind::Collision,
            "timeout" => OutcomeKind::Timeout,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub kind: OutcomeKind,
    pub steps_elapsed: usize,
}

/// Whether obstacle distances are measured from the robot centre or from
/// the robot's body surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceMode {
    #[default]
    Center,
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    pub n_beams: usize,
    pub fov_deg: f64,
    pub max_range: f64,
    pub max_steps: usize,
    /// Uniform jitter half-width applied to the start position (m).
    pub start_jitter_xy: f64,
    /// Uniform jitter half-width applied to the start heading (rad).
    pub start_jitter_heading: f64,
    pub randomize_start: bool,
    pub randomize_goal: bool,
    /// Extra clearance beyond the robot radius for sampled starts and goals.
    pub spawn_margin: f64,
    pub min_goal_separation: f64,
    pub clearance: ClearanceMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            n_beams: 20,
            fov_deg: 180.0,
            max_range: 7.0,
            max_steps: 500,
            start_jitter_xy: 0.0,
            start_jitter_heading: 0.0,
            randomize_start: false,
            randomize_goal: false,
            spawn_margin: 0.3,
            min_goal_separation: 1.0,
            clearance: ClearanceMode::Center,
        }
    }
}

impl EnvConfig {
    pub fn fov(&self) -> f64 {
        self.fov_deg.to_radians()
    }

    pub fn obs_dim(&self) -> usize {
        self.n_beams + 4
    }
}

/// Bearing of each beam relative to the heading.
pub fn beam_offsets(n_beams: usize, fov: f64) -> Vec<f64> {
    if n_beams == 1 {
        return vec![0.0];
    }
    let step = fov / (n_beams - 1) as f64;
    (0..n_beams).map(|i| -fov / 2.0 + i as f64 * step).collect()
}

/// Range along one absolute direction to the first obstacle or wall.
pub fn cast_ray(origin: Point2, angle: f64, world: &World, max_range: f64) -> f64 {
    let dir = Point2::new(angle.cos(), angle.sin());
    let mut t = world.bounds.ray_exit(origin, dir);
    for o in &world.obstacles {
        if let Some(hit) = o.ray_hit(origin, dir) {
            t = t.min(hit);
        }
    }
    t.clamp(MIN_RANGE, max_range)
}

/// Simulated range scan: beam `i` points at `heading - fov/2 + i*fov/(n-1)`.
pub fn raycast_scan(pose: &Pose, world: &World, n_beams: usize, fov: f64, max_range: f64) -> Vec<f64> {
    let origin = pose.position();
    beam_offsets(n_beams, fov)
        .into_iter()
        .map(|off| cast_ray(origin, pose.heading + off, world, max_range))
        .collect()
}

/// Exact distance from the robot to the nearest obstacle or wall, never negative.
pub fn min_obstacle_distance(pose: &Pose, world: &World, mode: ClearanceMode) -> f64 {
    let c = world.clearance(pose.position());
    match mode {
        ClearanceMode::Center => c,
        ClearanceMode::Body => (c - world.robot_radius).max(0.0),
    }
}

/// Unicycle Euler step with heading wrap.
pub fn integrate(pose: &Pose, action: Action, dt: f64) -> Pose {
    Pose {
        x: pose.x + action.linear * pose.heading.cos() * dt,
        y: pose.y + action.linear * pose.heading.sin() * dt,
        heading: wrap_angle(pose.heading + action.angular * dt),
    }
}

/// Running totals kept across episodes for instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnvCounters {
    pub episodes: u64,
    pub steps: u64,
    pub clamped_actions: u64,
}

/// One navigation environment instance. The world is shared read-only.
#[derive(Debug, Clone)]
pub struct NavEnv {
    world: Arc<World>,
    config: EnvConfig,
    start: Pose,
    goal: Point2,
    pose: Pose,
    steps: usize,
    finished: Option<OutcomeKind>,
    last_action: Action,
    rng: ChaCha8Rng,
    counters: EnvCounters,
}

impl NavEnv {
    pub fn new(world: Arc<World>, config: EnvConfig) -> Self {
        let start = world.start;
        let goal = world.goal;
        Self {
            world,
            config,
            start,
            goal,
            pose: start,
            steps: 0,
            finished: None,
            last_action: Action::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
            counters: EnvCounters::default(),
        }
    }

    /// Starts a new episode. Randomisation and jitter draw from a generator
    /// seeded with `seed`, so equal seeds give identical episodes.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.config;
        let world = &*self.world;
        let mut start = world.start;
        if cfg.randomize_start {
            let p = world.sample_free(&mut self.rng, cfg.spawn_margin, world.start.position());
            let heading = self.rng.random_range(-PI..PI);
            start = Pose::new(p.x, p.y, heading);
        } else if cfg.start_jitter_xy > 0.0 || cfg.start_jitter_heading > 0.0 {
            for _ in 0..100 {
                let dx = jitter(&mut self.rng, cfg.start_jitter_xy);
                let dy = jitter(&mut self.rng, cfg.start_jitter_xy);
                let dh = jitter(&mut self.rng, cfg.start_jitter_heading);
                let cand = Pose::new(world.start.x + dx, world.start.y + dy, world.start.heading + dh);
                if world.is_free(cand.position(), world.robot_radius) {
                    start = cand;
                    break;
                }
            }
        }
        let mut goal = world.goal;
        if cfg.randomize_goal {
            for _ in 0..1000 {
                let g = world.sample_free(&mut self.rng, cfg.spawn_margin, world.goal);
                if g.distance(start.position()) >= cfg.min_goal_separation {
                    goal = g;
                    break;
                }
            }
        }
        self.start = start;
        self.goal = goal;
        self.pose = start;
        self.steps = 0;
        self.finished = None;
        self.last_action = Action::default();
        self.counters.episodes += 1;
        self.observe()
    }

    pub fn step(&mut self, action: Action) -> Result<(Observation, StepOutcome), SimError> {
        self.step_dt(action, self.config.dt)
    }

    pub fn step_dt(&mut self, action: Action, dt: f64) -> Result<(Observation, StepOutcome), SimError> {
        if let Some(kind) = self.finished {
            return Err(SimError::EpisodeFinished(kind));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidDt(dt));
        }
        let applied = action.clamped();
        if applied != action {
            self.counters.clamped_actions += 1;
        }
        self.pose = integrate(&self.pose, applied, dt);
        self.last_action = applied;
        self.steps += 1;
        self.counters.steps += 1;
        let kind = self.classify();
        if kind.is_terminal() {
            self.finished = Some(kind);
        }
        Ok((self.observe(), StepOutcome { kind, steps_elapsed: self.steps }))
    }

    fn classify(&self) -> OutcomeKind {
        let p = self.pose.position();
        if self.world.clearance(p) < self.world.robot_radius {
            OutcomeKind::Collision
        } else if p.distance(self.goal) <= self.world.goal_radius {
            OutcomeKind::GoalReached
        } else if self.steps >= self.config.max_steps {
            OutcomeKind::Timeout
        } else {
            OutcomeKind::Running
        }
    }

    pub fn observe(&self) -> Observation {
        let scan = raycast_scan(
            &self.pose,
            &self.world,
            self.config.n_beams,
            self.config.fov(),
            self.config.max_range,
        );
        let (goal_distance, goal_bearing) = self.polar_to(self.goal);
        Observation { scan, goal_distance, goal_bearing, last_action: self.last_action }
    }

    /// Distance and heading-relative bearing from the robot to `target`.
    pub fn polar_to(&self, target: Point2) -> (f64, f64) {
        let p = self.pose.position();
        (p.distance(target), wrap_angle(p.angle_to(target) - self.pose.heading))
    }

    pub fn min_obstacle_distance(&self) -> f64 {
        min_obstacle_distance(&self.pose, &self.world, self.config.clearance)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn shared_world(&self) -> Arc<World> {
        Arc::clone(&self.world)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn goal(&self) -> Point2 {
        self.goal
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn finished(&self) -> Option<OutcomeKind> {
        self.finished
    }

    pub fn counters(&self) -> EnvCounters {
        self.counters
    }

    /// Places the robot at an arbitrary pose without touching the step counter.
    /// Used by fixtures and tests.
    pub fn set_pose(&mut self, pose: Pose) {
        self.pose = Pose::new(pose.x, pose.y, pose.heading);
    }
}

fn jitter<R: Rng>(rng: &mut R, half: f64) -> f64 {
    if half > 0.0 {
        rng.random_range(-half..=half)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_env() -> NavEnv {
        let w = World::empty(10.0, 10.0, Pose::new(1.0, 1.0, 0.0), Point2::new(9.0, 9.0));
        NavEnv::new(Arc::new(w), EnvConfig::default())
    }

    #[test]
    fn reset_is_deterministic_and_measures_goal() {
        let mut env = empty_env();
        let a = env.reset(7);
        let b = env.reset(7);
        assert_eq!(a, b);
        assert!((a.goal_distance - 128f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.flatten().len(), 24);
    }

    #[test]
    fn zero_action_leaves_pose() {
        let mut env = empty_env();
        env.reset(0);
        let before = env.pose();
        let (_, out) = env.step(Action::new(0.0, 0.0)).unwrap();
        assert_eq!(env.pose(), before);
        assert_eq!(out.kind, OutcomeKind::Running);
    }

    #[test]
    fn forward_step_advances_exactly() {
        let mut env = empty_env();
        env.reset(0);
        env.step_dt(Action::new(1.0, 0.0), 0.1).unwrap();
        assert_eq!(env.pose().x, 1.0 + 0.1);
        assert_eq!(env.pose().y, 1.0);
    }

    #[test]
    fn timeout_at_five_hundred() {
        let mut env = empty_env();
        env.reset(0);
        for i in 1..=500 {
            let (_, out) = env.step(Action::default()).unwrap();
            assert_eq!(out.steps_elapsed, i);
            if i < 500 {
                assert_eq!(out.kind, OutcomeKind::Running);
            } else {
                assert_eq!(out.kind, OutcomeKind::Timeout);
            }
        }
        assert_eq!(env.step(Action::default()), Err(SimError::EpisodeFinished(OutcomeKind::Timeout)));
    }

    #[test]
    fn actions_are_clamped() {
        let mut env = empty_env();
        env.reset(0);
        env.step(Action::new(3.0, -2.0)).unwrap();
        assert_eq!(env.observe().last_action, Action::new(1.0, -1.0));
        assert_eq!(env.counters().clamped_actions, 1);
    }

    #[test]
    fn wall_and_circle_ranges() {
        let w = World::empty(10.0, 10.0, Pose::new(7.0, 5.0, 0.0), Point2::new(1.0, 1.0));
        let scan = raycast_scan(&w.start, &w, 21, PI, 7.0);
        assert!((scan[10] - 3.0).abs() < 1e-12);

        let mut w = World::empty(100.0, 100.0, Pose::new(50.0, 50.0, 0.0), Point2::new(1.0, 1.0));
        w.obstacles.push(Shape::Circle { center: Point2::new(52.0, 50.0), radius: 0.5 });
        let scan = raycast_scan(&w.start, &w, 3, PI, 7.0);
        assert!((scan[1] - 1.5).abs() < 1e-12);
        assert_eq!(scan[0], 7.0);
    }

    #[test]
    fn clearance_examples() {
        let mut w = World::empty(100.0, 100.0, Pose::new(50.0, 50.0, 0.0), Point2::new(1.0, 1.0));
        w.obstacles.push(Shape::Circle { center: Point2::new(53.0, 50.0), radius: 1.0 });
        assert!((min_obstacle_distance(&w.start, &w, ClearanceMode::Center) - 2.0).abs() < 1e-12);
        let touching = Pose::new(52.0, 50.0, 0.0);
        assert_eq!(min_obstacle_distance(&touching, &w, ClearanceMode::Center), 0.0);
        let w = World::empty(10.0, 10.0, Pose::new(1.0, 3.0, 0.0), Point2::new(9.0, 9.0));
        assert_eq!(min_obstacle_distance(&w.start, &w, ClearanceMode::Center), 1.0);
        assert!((min_obstacle_distance(&w.start, &w, ClearanceMode::Body) - 0.8).abs() < 1e-12);
    }
}
