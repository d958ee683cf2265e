//! Fixed-capacity FIFO experience replay with uniform sampling.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("observation length {got} does not match buffer dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot sample {requested} transitions from a buffer holding {size}")]
    Underfull { requested: usize, size: usize },
    #[error("replay capacity must be positive")]
    ZeroCapacity,
    #[error("malformed replay snapshot: {0}")]
    Snapshot(String),
}

/// Actions that can be stored in a flat `f64` snapshot.
pub trait FlatAction: Sized {
    const WIDTH: usize;
    fn write(&self, out: &mut Vec<f64>);
    fn read(values: &[f64]) -> Option<Self>;
}

impl FlatAction for usize {
    const WIDTH: usize = 1;
    fn write(&self, out: &mut Vec<f64>) {
        out.push(*self as f64);
    }
    fn read(values: &[f64]) -> Option<Self> {
        let v = values[0];
        (v >= 0.0 && v.fract() == 0.0 && v < 9.0e15).then_some(v as usize)
    }
}

impl FlatAction for [f64; 2] {
    const WIDTH: usize = 2;
    fn write(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
    fn read(values: &[f64]) -> Option<Self> {
        Some([values[0], values[1]])
    }
}

/// One stored step. `steps` is how many environment ticks the transition
/// spans (1 for low-level transitions, the subgoal lifetime for high-level
/// ones) and sets the bootstrap discount `gamma^steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub obs: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True only for environment terminals (goal, collision), not timeouts.
    pub done: bool,
    pub steps: u32,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    capacity: usize,
    obs_dim: usize,
    storage: Vec<Transition<A>>,
    cursor: usize,
}

impl<A: Clone> ReplayBuffer<A> {
    pub fn new(capacity: usize, obs_dim: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self { capacity, obs_dim, storage: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 })
    }

    pub fn push(&mut self, t: Transition<A>) -> Result<(), ReplayError> {
        for len in [t.obs.len(), t.next_obs.len()] {
            if len != self.obs_dim {
                return Err(ReplayError::Dimension { expected: self.obs_dim, got: len });
            }
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Uniform sampling with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>, ReplayError> {
        if batch > self.storage.len() || batch == 0 {
            return Err(ReplayError::Underfull { requested: batch, size: self.storage.len() });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition<A>>, ReplayError> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| &self.storage[i]).collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition<A>> {
        self.storage.get(index)
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition<A>> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    pub fn clear(&mut self) {
        self.storage.clear();
        self.cursor = 0;
    }
}

const SNAPSHOT_HEADER: usize = 5;

impl<A: Clone + FlatAction> ReplayBuffer<A> {
    /// Flat snapshot preserving storage order and the write cursor, so a
    /// restored buffer samples exactly like the original.
    /// Layout: capacity, obs_dim, cursor, action width, len, then per record
    /// obs, action, reward, next_obs, done (0/1), steps.
    pub fn snapshot(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(SNAPSHOT_HEADER + self.storage.len() * self.record_width());
        out.extend([self.capacity, self.obs_dim, self.cursor, A::WIDTH, self.storage.len()].map(|v| v as f64));
        for t in &self.storage {
            out.extend_from_slice(&t.obs);
            t.action.write(&mut out);
            out.push(t.reward);
            out.extend_from_slice(&t.next_obs);
            out.push(if t.done { 1.0 } else { 0.0 });
            out.push(t.steps as f64);
        }
        out
    }

    pub fn from_snapshot(data: &[f64]) -> Result<Self, ReplayError> {
        let bad = |m: &str| ReplayError::Snapshot(m.to_string());
        if data.len() < SNAPSHOT_HEADER {
            return Err(bad("missing header"));
        }
        let header: Vec<usize> = data[..SNAPSHOT_HEADER]
            .iter()
            .map(|&v| if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 { Ok(v as usize) } else { Err(bad("header field is not a count")) })
            .collect::<Result<_, _>>()?;
        let (capacity, obs_dim, cursor, width, len) = (header[0], header[1], header[2], header[3], header[4]);
        if width != A::WIDTH {
            return Err(bad("action width does not match buffer type"));
        }
        let mut buf = Self::new(capacity, obs_dim)?;
        if len > capacity || cursor >= capacity || (len < capacity && cursor != len % capacity) {
            return Err(bad("inconsistent length and cursor"));
        }
        let rw = buf.record_width();
        if data.len() != SNAPSHOT_HEADER + len * rw {
            return Err(bad("record data has the wrong length"));
        }
        for rec in data[SNAPSHOT_HEADER..].chunks_exact(rw) {
            let (obs, rest) = rec.split_at(obs_dim);
            let (action, rest) = rest.split_at(A::WIDTH);
            let reward = rest[0];
            let (next_obs, rest) = rest[1..].split_at(obs_dim);
            let done = match rest[0] {
                0.0 => false,
                1.0 => true,
                _ => return Err(bad("done flag must be 0 or 1")),
            };
            let steps = rest[1];
            if !(steps >= 0.0 && steps.fract() == 0.0 && steps <= u32::MAX as f64) {
                return Err(bad("step count is not a u32"));
            }
            let action = A::read(action).ok_or_else(|| bad("invalid action"))?;
            buf.storage.push(Transition { obs: obs.to_vec(), action, reward, next_obs: next_obs.to_vec(), done, steps: steps as u32 });
        }
        buf.cursor = cursor;
        Ok(buf)
    }

    fn record_width(&self) -> usize {
        2 * self.obs_dim + A::WIDTH + 3
    }
}
