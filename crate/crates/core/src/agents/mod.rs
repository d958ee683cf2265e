//! Off-policy learners: a discrete DQN and a continuous TD3, both built on
//! [`crate::neuralnet`] and [`crate::replay`].

mod dqn;
mod td3;

pub use dqn::{DqnAgent, DqnConfig, DqnCounters, EpsilonSchedule, TargetSync};
pub use td3::{action_from_normalized, normalized_from_action, Td3Agent, Td3Config, Td3Counters, Td3Losses};

use ndarray::Array2;
use thiserror::Error;

use crate::neuralnet::{CheckpointError, NetError};
use crate::replay::{ReplayError, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite training value: {0}")]
    NonFinite(String),
    #[error("update schedule violated: {0}")]
    Schedule(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

/// Stacks observation rows into a `batch × dim` matrix.
pub(crate) fn stack_rows<'a, I>(rows: I, dim: usize) -> Array2<f64>
where
    I: ExactSizeIterator<Item = &'a [f64]>,
{
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * dim);
    for r in rows {
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, dim), flat).expect("rows have the declared width")
}

pub(crate) fn obs_matrix<A>(batch: &[&Transition<A>], next: bool) -> Array2<f64> {
    let dim = if next { batch[0].next_obs.len() } else { batch[0].obs.len() };
    stack_rows(batch.iter().map(|t| if next { t.next_obs.as_slice() } else { t.obs.as_slice() }), dim)
}
