//! Hierarchical robot navigation: a discrete DQN chooses subgoals and a
//! continuous TD3 controller drives a differential-drive robot toward them
//! in a deterministic 2D simulator.

pub mod agents;
pub mod benchmarks;
pub mod config;
pub mod hierarchy;
pub mod neuralnet;
pub mod plot;
pub mod policy;
pub mod replay;
pub mod rewards;
pub mod simworld;
