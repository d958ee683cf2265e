//! Evaluation metrics, the A* reference planner, and report output.
//!
//! Per-episode CSV header:
//! `episode,world,seed,outcome,steps,time_s,path_length,straight_line,efficiency,smoothness,astar_length,astar_efficiency`
//!
//! Smoothness is `1 - mean(|Δheading|) / 180` over consecutive path segment
//! headings in degrees. Time to goal is `steps · dt`. Timeouts count toward
//! the rates but not toward any mean; efficiency and time are averaged over
//! successes, smoothness over successes and collisions.

mod astar;
mod metrics;

pub use astar::{astar_cells, astar_reference, Cell, Grid};
pub use metrics::{path_efficiency, path_length, trajectory_smoothness};

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hierarchy::episode_seed;
use crate::policy::{NavPolicy, PolicyError};
use crate::simworld::{EnvConfig, NavEnv, OutcomeKind, Point2, SimError, World};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("need at least {needed} trajectory points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("trajectory has zero length")]
    ZeroLength,
    #[error("grid resolution must be positive, got {0}")]
    Resolution(f64),
    #[error("start or goal lies in a blocked or out-of-bounds cell")]
    BlockedEndpoint,
    #[error("goal is unreachable on the planning grid")]
    Unreachable,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("evaluation needs at least one world and one episode")]
    Empty,
}

pub const REPORT_HEADER: [&str; 12] = [
    "episode",
    "world",
    "seed",
    "outcome",
    "steps",
    "time_s",
    "path_length",
    "straight_line",
    "efficiency",
    "smoothness",
    "astar_length",
    "astar_efficiency",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Grid resolution for the A* reference; `None` skips it.
    pub astar_resolution: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { episodes: 100, seed: 0, astar_resolution: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub world: String,
    pub seed: u64,
    pub outcome: OutcomeKind,
    pub steps: usize,
    pub time_s: f64,
    pub path_length: f64,
    /// Start-to-goal distance less the goal radius: the shortest any
    /// successful path can be.
    pub straight_line: f64,
    pub efficiency: Option<f64>,
    pub smoothness: Option<f64>,
    pub astar_length: Option<f64>,
    pub astar_efficiency: Option<f64>,
    pub trajectory: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub policy: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub mean_time_to_goal: Option<f64>,
    pub mean_path_efficiency: Option<f64>,
    pub mean_smoothness: Option<f64>,
    pub mean_astar_efficiency: Option<f64>,
    pub rows: Vec<EpisodeMetrics>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl MetricsReport {
    pub fn from_rows(policy: &str, rows: Vec<EpisodeMetrics>) -> Self {
        let n = rows.len().max(1) as f64;
        let count = |k: OutcomeKind| rows.iter().filter(|r| r.outcome == k).count() as f64 / n;
        let success_rate = count(OutcomeKind::GoalReached);
        let collision_rate = count(OutcomeKind::Collision);
        let timeout_rate = count(OutcomeKind::Timeout);
        let successes = || rows.iter().filter(|r| r.outcome == OutcomeKind::GoalReached);
        Self {
            policy: policy.to_string(),
            episodes: rows.len(),
            success_rate,
            collision_rate,
            timeout_rate,
            mean_time_to_goal: mean(successes().map(|r| r.time_s)),
            mean_path_efficiency: mean(successes().filter_map(|r| r.efficiency)),
            mean_smoothness: mean(rows.iter().filter_map(|r| r.smoothness)),
            mean_astar_efficiency: mean(successes().filter_map(|r| r.astar_efficiency)),
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.episode.to_string(),
                r.world.clone(),
                r.seed.to_string(),
                r.outcome.as_str().to_string(),
                r.steps.to_string(),
                format!("{}", r.time_s),
                format!("{}", r.path_length),
                format!("{}", r.straight_line),
                opt(r.efficiency),
                opt(r.smoothness),
                opt(r.astar_length),
                opt(r.astar_efficiency),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
        format!(
            "policy: {}\nepisodes: {}\nsuccess_rate: {:.4}\ncollision_rate: {:.4}\ntimeout_rate: {:.4}\n\
             mean_time_to_goal_s: {}\nmean_path_efficiency: {}\nmean_smoothness: {}\nmean_astar_efficiency: {}\n\
             smoothness = 1 - mean(|heading change|)/180 over path segments\n",
            self.policy,
            self.episodes,
            self.success_rate,
            self.collision_rate,
            self.timeout_rate,
            f(self.mean_time_to_goal),
            f(self.mean_path_efficiency),
            f(self.mean_smoothness),
            f(self.mean_astar_efficiency),
        )
    }
}

/// Side-by-side aggregates of several reports.
pub fn write_comparison_csv<W: Write>(reports: &[MetricsReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "episodes",
        "success_rate",
        "collision_rate",
        "timeout_rate",
        "mean_time_to_goal",
        "mean_path_efficiency",
        "mean_smoothness",
        "mean_astar_efficiency",
    ])?;
    for r in reports {
        w.write_record([
            r.policy.clone(),
            r.episodes.to_string(),
            format!("{}", r.success_rate),
            format!("{}", r.collision_rate),
            format!("{}", r.timeout_rate),
            opt(r.mean_time_to_goal),
            opt(r.mean_path_efficiency),
            opt(r.mean_smoothness),
            opt(r.mean_astar_efficiency),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
    let mut s = format!(
        "{:<18} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "policy", "success", "collide", "timeout", "time_s", "eff", "smooth", "eff_A*"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<18} {:>8.3} {:>8.3} {:>8.3} {:>8} {:>8} {:>8} {:>8}\n",
            r.policy,
            r.success_rate,
            r.collision_rate,
            r.timeout_rate,
            f(r.mean_time_to_goal),
            f(r.mean_path_efficiency),
            f(r.mean_smoothness),
            f(r.mean_astar_efficiency)
        ));
    }
    s
}

/// Runs `options.episodes` greedy episodes, cycling through `worlds`.
/// Episode `i` uses the same environment seed and policy generator for
/// every policy, so results are a pure function of the inputs.
pub fn evaluate(
    policy: &mut dyn NavPolicy,
    worlds: &[Arc<World>],
    env_config: &EnvConfig,
    options: &EvalOptions,
) -> Result<MetricsReport, EvalError> {
    if worlds.is_empty() || options.episodes == 0 {
        return Err(EvalError::Empty);
    }
    let mut envs: Vec<NavEnv> = worlds.iter().map(|w| NavEnv::new(Arc::clone(w), env_config.clone())).collect();
    let mut rows = Vec::with_capacity(options.episodes);
    for i in 0..options.episodes {
        let seed = episode_seed(options.seed, i as u64);
        let env = &mut envs[i % worlds.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_E7A1);
        let mut obs = env.reset(seed);
        policy.begin_episode(env);
        let mut trajectory = vec![env.pose().position()];
        let outcome = loop {
            let action = policy.act(env, &obs, &mut rng)?;
            let (next, out) = env.step(action)?;
            trajectory.push(env.pose().position());
            obs = next;
            if out.kind.is_terminal() {
                break out.kind;
            }
        };
        rows.push(episode_metrics(i, env, seed, outcome, trajectory, options)?);
    }
    Ok(MetricsReport::from_rows(policy.name(), rows))
}

fn episode_metrics(
    episode: usize,
    env: &NavEnv,
    seed: u64,
    outcome: OutcomeKind,
    trajectory: Vec<Point2>,
    options: &EvalOptions,
) -> Result<EpisodeMetrics, EvalError> {
    let world = env.world();
    let start = env.start().position();
    let goal = env.goal();
    let straight_line = (start.distance(goal) - world.goal_radius).max(0.0);
    let length = path_length(&trajectory);
    let success = outcome == OutcomeKind::GoalReached;
    let efficiency = if success && length > 0.0 { Some(straight_line / length) } else { None };
    let smoothness = if outcome != OutcomeKind::Timeout && trajectory.len() >= 3 {
        Some(trajectory_smoothness(&trajectory)?)
    } else {
        None
    };
    let astar_length = match options.astar_resolution {
        Some(res) => match astar_reference(world, start, goal, res) {
            Ok(l) => Some(l),
            Err(MetricError::Unreachable | MetricError::BlockedEndpoint) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let astar_efficiency = match (success, astar_length) {
        (true, Some(a)) if length > 0.0 => Some(a / length),
        _ => None,
    };
    Ok(EpisodeMetrics {
        episode,
        world: world.name.clone(),
        seed,
        outcome,
        steps: env.steps(),
        time_s: env.steps() as f64 * env.config().dt,
        path_length: length,
        straight_line,
        efficiency,
        smoothness,
        astar_length,
        astar_efficiency,
        trajectory,
    })
}
