//! Dense feed-forward networks with hand-written backpropagation, Adam, soft
//! target updates and a versioned binary checkpoint format.

mod adam;
mod checkpoint;
mod loss;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointEntry, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{mse_loss, mse_loss_batch};
pub use network::{Activation, Architecture, ForwardCache, Gradients, Layer, Network};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward called without a forward cache for this network")]
    MissingCache,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
}

/// Builds an MLP with `activation` on every hidden layer and `head` on the
/// output layer.
pub fn mlp(input: usize, hidden: &[usize], output: usize, activation: Activation, head: Activation, seed: u64) -> Result<Network, NetError> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    let mut acts = vec![activation; hidden.len()];
    acts.push(head);
    Network::new(&sizes, &acts, seed)
}
