//! Navigation policies behind one trait, looked up by name.
//!
//! Learned policies are built from an agent bundle; scripted ones need
//! nothing. Evaluation and benchmarking only see `dyn NavPolicy`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{action_from_normalized, AgentError, DqnAgent, Td3Agent};
use crate::hierarchy::{subgoal_decode, HierarchyConfig, HierarchyError, Learner, LearnerKind, SubgoalTracker};
use crate::simworld::{Action, NavEnv, Observation, MAX_ANGULAR, MAX_LINEAR};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{name}` (available: {available})")]
    Unknown { name: String, available: String },
    #[error("policy `{0}` needs a trained agent checkpoint")]
    NeedsAgent(String),
    #[error("policy `{name}` needs a {expected} checkpoint")]
    WrongAgent { name: String, expected: &'static str },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

pub trait NavPolicy {
    fn name(&self) -> &str;

    /// Called after every reset.
    fn begin_episode(&mut self, _env: &NavEnv) {}

    /// Chooses the command for the current state. `rng` is the evaluation's
    /// seeded generator; deterministic policies ignore it.
    fn act(&mut self, env: &NavEnv, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError>;

    /// Identifier of the active subgoal, for policies that issue them.
    fn subgoal_id(&self) -> Option<usize> {
        None
    }
}

/// Inputs available to policy factories.
#[derive(Debug, Clone, Default)]
pub struct PolicyContext {
    pub learner: Option<Arc<Learner>>,
}

pub type PolicyFactory = fn(&PolicyContext) -> Result<Box<dyn NavPolicy>, PolicyError>;

struct Entry {
    description: &'static str,
    factory: PolicyFactory,
}

pub struct PolicyRegistry {
    entries: BTreeMap<String, Entry>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("td3", "flat TD3 controller driving toward the goal", |ctx| {
            Ok(Box::new(Td3Policy::new(learner_of(ctx, "td3", LearnerKind::Flat)?)))
        });
        r.register("hrl", "DQN subgoal planner over the TD3 controller", |ctx| {
            Ok(Box::new(HierarchicalPolicy::new(learner_of(ctx, "hrl", LearnerKind::Hierarchical)?, false)?))
        });
        r.register("hrl-random-high", "uniformly random subgoals over the trained TD3 controller", |ctx| {
            Ok(Box::new(HierarchicalPolicy::new(learner_of(ctx, "hrl-random-high", LearnerKind::Hierarchical)?, true)?))
        });
        r.register("goal-seeker", "scripted: turn toward the goal and drive", |_| Ok(Box::new(GoalSeeker::default())));
        r.register("random", "uniformly random velocity commands", |_| Ok(Box::new(RandomPolicy)));
        r.register("flee", "scripted: drive away from the goal at full speed", |_| Ok(Box::new(Flee)));
        r
    }

    pub fn register(&mut self, name: &str, description: &'static str, factory: PolicyFactory) {
        self.entries.insert(name.to_string(), Entry { description, factory });
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn describe(&self) -> Vec<(&str, &'static str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.description)).collect()
    }

    pub fn build(&self, name: &str, ctx: &PolicyContext) -> Result<Box<dyn NavPolicy>, PolicyError> {
        let entry = self.entries.get(name).ok_or_else(|| PolicyError::Unknown {
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        (entry.factory)(ctx)
    }
}

fn learner_of(ctx: &PolicyContext, name: &str, kind: LearnerKind) -> Result<Arc<Learner>, PolicyError> {
    let l = ctx.learner.clone().ok_or_else(|| PolicyError::NeedsAgent(name.to_string()))?;
    if l.kind != kind {
        return Err(PolicyError::WrongAgent { name: name.to_string(), expected: kind.as_str() });
    }
    Ok(l)
}

/// Greedy flat controller.
pub struct Td3Policy {
    td3: Td3Agent,
    max_range: f64,
}

impl Td3Policy {
    pub fn new(learner: Arc<Learner>) -> Self {
        Self { td3: learner.td3.clone(), max_range: learner.setup.env.max_range }
    }
}

impl NavPolicy for Td3Policy {
    fn name(&self) -> &str {
        "td3"
    }

    fn act(&mut self, _env: &NavEnv, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(action_from_normalized(self.td3.policy(&obs.features(self.max_range))?))
    }
}

/// Subgoal planner (greedy DQN or uniformly random) over the greedy controller.
pub struct HierarchicalPolicy {
    td3: Td3Agent,
    dqn: DqnAgent,
    config: HierarchyConfig,
    max_range: f64,
    random_high: bool,
    tracker: SubgoalTracker,
}

impl HierarchicalPolicy {
    pub fn new(learner: Arc<Learner>, random_high: bool) -> Result<Self, PolicyError> {
        let dqn = learner.dqn.clone().ok_or(PolicyError::WrongAgent {
            name: "hrl".into(),
            expected: "hrl",
        })?;
        Ok(Self {
            td3: learner.td3.clone(),
            dqn,
            config: learner.setup.hierarchy.clone(),
            max_range: learner.setup.env.max_range,
            random_high,
            tracker: SubgoalTracker::new(),
        })
    }
}

impl NavPolicy for HierarchicalPolicy {
    fn name(&self) -> &str {
        if self.random_high {
            "hrl-random-high"
        } else {
            "hrl"
        }
    }

    fn begin_episode(&mut self, _env: &NavEnv) {
        self.tracker = SubgoalTracker::new();
    }

    fn act(&mut self, env: &NavEnv, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        let pose = env.pose();
        if self.tracker.needs_decision(&pose, &self.config) {
            let index = if self.random_high {
                rng.random_range(0..self.config.n_actions())
            } else {
                self.dqn.select_action(&obs.features(self.max_range), rng, true)?
            };
            let g = subgoal_decode(index, &pose, &env.world().bounds, &self.config, env.steps())?;
            self.tracker.issue(g);
        }
        let g = self.tracker.current().expect("a subgoal was just issued");
        let (d, b) = env.polar_to(g.absolute_target);
        let u = self.td3.policy(&obs.retargeted(d, b).features(self.max_range))?;
        self.tracker.tick();
        Ok(action_from_normalized(u))
    }

    fn subgoal_id(&self) -> Option<usize> {
        self.tracker.issued().checked_sub(1)
    }
}

/// Rotates toward the goal, driving forward once roughly aligned.
#[derive(Debug, Clone, Copy)]
pub struct GoalSeeker {
    pub turn_gain: f64,
    /// Bearing error (radians) below which the robot drives at full speed.
    pub align_tolerance: f64,
}

impl Default for GoalSeeker {
    fn default() -> Self {
        Self { turn_gain: 2.0, align_tolerance: 0.3 }
    }
}

impl NavPolicy for GoalSeeker {
    fn name(&self) -> &str {
        "goal-seeker"
    }

    fn act(&mut self, _env: &NavEnv, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        let b = obs.goal_bearing;
        let angular = (self.turn_gain * b).clamp(-MAX_ANGULAR, MAX_ANGULAR);
        let linear = if b.abs() < self.align_tolerance { MAX_LINEAR } else { 0.0 };
        Ok(Action::new(linear, angular))
    }
}

pub struct RandomPolicy;

impl NavPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _env: &NavEnv, _obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(Action::new(rng.random_range(0.0..=MAX_LINEAR), rng.random_range(-MAX_ANGULAR..=MAX_ANGULAR)))
    }
}

/// Turns away from the goal and drives at full speed until it hits something.
pub struct Flee;

impl NavPolicy for Flee {
    fn name(&self) -> &str {
        "flee"
    }

    fn act(&mut self, _env: &NavEnv, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        let away = crate::simworld::wrap_angle(obs.goal_bearing + std::f64::consts::PI);
        Ok(Action::new(MAX_LINEAR, (2.0 * away).clamp(-MAX_ANGULAR, MAX_ANGULAR)))
    }
}
