//! Per-episode trajectory records and their CSV form.
//!
//! Trajectory CSV header:
//! `step,x,y,heading,linear,angular,d_min,r_env,r_low,subgoal_id,outcome`
//! (`step` 0 is the start pose with empty action and reward fields).
//!
//! Subgoal CSV header:
//! `subgoal_id,action_index,bearing_offset_deg,distance,target_x,target_y,issued_at,ended_at,steps,end_status,theta_diff,d_actual,r_high`

use std::io::Write;

use crate::simworld::{OutcomeKind, Point2, Pose};

use super::SubgoalStatus;

pub const TRAJECTORY_HEADER: [&str; 11] =
    ["step", "x", "y", "heading", "linear", "angular", "d_min", "r_env", "r_low", "subgoal_id", "outcome"];

pub const SUBGOAL_HEADER: [&str; 13] = [
    "subgoal_id",
    "action_index",
    "bearing_offset_deg",
    "distance",
    "target_x",
    "target_y",
    "issued_at",
    "ended_at",
    "steps",
    "end_status",
    "theta_diff",
    "d_actual",
    "r_high",
];

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based index of the control step that produced this pose.
    pub step: usize,
    pub pose: Pose,
    pub linear: f64,
    pub angular: f64,
    pub d_min: f64,
    pub outcome: OutcomeKind,
    pub r_env: f64,
    pub r_low: f64,
    pub subgoal_id: Option<usize>,
}

/// How a subgoal's lifetime ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgoalEnd {
    Status(SubgoalStatus),
    Episode(OutcomeKind),
}

impl SubgoalEnd {
    pub fn as_str(self) -> &'static str {
        match self {
            SubgoalEnd::Status(SubgoalStatus::Reached) => "reached",
            SubgoalEnd::Status(SubgoalStatus::Expired) => "expired",
            SubgoalEnd::Status(SubgoalStatus::Active) => "active",
            SubgoalEnd::Episode(k) => k.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalRecord {
    pub id: usize,
    pub action_index: usize,
    pub bearing_offset_deg: f64,
    pub distance: f64,
    pub target: Point2,
    pub issued_at: usize,
    pub ended_at: usize,
    pub end: SubgoalEnd,
    pub theta_diff: f64,
    pub d_actual: f64,
    pub r_high: f64,
    /// Observation features at issuance and at the end of the lifetime.
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
}

impl SubgoalRecord {
    pub fn steps(&self) -> usize {
        self.ended_at - self.issued_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeLosses {
    pub q: Option<f64>,
    pub critic1: Option<f64>,
    pub critic2: Option<f64>,
    pub actor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub start: Pose,
    pub goal: Point2,
    pub steps: Vec<StepRecord>,
    pub subgoals: Vec<SubgoalRecord>,
    pub outcome: OutcomeKind,
    pub reward_env: f64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub losses: EpisodeLosses,
    pub epsilon: Option<f64>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Start position followed by the position after every step.
    pub fn positions(&self) -> Vec<Point2> {
        std::iter::once(self.start.position()).chain(self.steps.iter().map(|s| s.pose.position())).collect()
    }

    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAJECTORY_HEADER)?;
        let s = self.start;
        w.write_record([
            "0".to_string(),
            fmt(s.x),
            fmt(s.y),
            fmt(s.heading),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            OutcomeKind::Running.as_str().to_string(),
        ])?;
        for r in &self.steps {
            w.write_record([
                r.step.to_string(),
                fmt(r.pose.x),
                fmt(r.pose.y),
                fmt(r.pose.heading),
                fmt(r.linear),
                fmt(r.angular),
                fmt(r.d_min),
                fmt(r.r_env),
                fmt(r.r_low),
                r.subgoal_id.map(|v| v.to_string()).unwrap_or_default(),
                r.outcome.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_subgoals_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUBGOAL_HEADER)?;
        for g in &self.subgoals {
            w.write_record([
                g.id.to_string(),
                g.action_index.to_string(),
                fmt(g.bearing_offset_deg),
                fmt(g.distance),
                fmt(g.target.x),
                fmt(g.target.y),
                g.issued_at.to_string(),
                g.ended_at.to_string(),
                g.steps().to_string(),
                g.end.as_str().to_string(),
                fmt(g.theta_diff),
                fmt(g.d_actual),
                fmt(g.r_high),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting, so CSV values parse back bit-exactly.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}
