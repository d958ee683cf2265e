//! Two-level control: a DQN planner issues discrete subgoals (bearing and
//! distance relative to the robot) and a TD3 controller drives toward them.

mod learner;
mod record;
mod subgoal;
mod train;

pub use learner::{
    episode_seed, HighRole, Learner, LearnerCounters, LearnerKind, LearnerSetup, LowRole, Roles, TrainError,
    UpdateSchedule,
};
pub use record::{
    EpisodeLosses, EpisodeRecord, StepRecord, SubgoalEnd, SubgoalRecord, SUBGOAL_HEADER, TRAJECTORY_HEADER,
};
pub use subgoal::{
    execution_terms, high_level_inputs, obstacle_ahead, subgoal_decode, subgoal_status, HierarchyConfig,
    HierarchyError, Subgoal, SubgoalStatus, SubgoalTracker, TrainingMode,
};
pub use train::{
    bundle_checkpoint, describe_bundle, load_bundle, read_log, roles_for, write_log_header, write_log_row, LogError,
    LogRow, TrainConfig, TrainState, Trainer, LOG_HEADER,
};
