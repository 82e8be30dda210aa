use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

/// Observations of one finished episode: `obs[t][agent]`, `t = 0..=T`.
pub type EpisodeObs = Vec<Vec<Vec<f64>>>;

/// One joint step. Observations are shared with the other steps of the same
/// episode; `obs[t]` is the state acted on and `obs[t + 1]` the successor.
#[derive(Debug, Clone)]
pub struct Transition {
    pub episode: Arc<EpisodeObs>,
    pub t: usize,
    /// Online hidden state per agent before acting at `t`.
    pub hidden: Vec<Vec<f64>>,
    /// Online hidden state per agent after acting at `t`.
    pub next_hidden: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// Agents whose Q-value enters the team sum.
    pub active: Vec<bool>,
    pub reward: f64,
    pub done: bool,
}

impl Transition {
    pub fn obs(&self) -> &[Vec<f64>] {
        &self.episode[self.t]
    }

    pub fn next_obs(&self) -> &[Vec<f64>] {
        &self.episode[self.t + 1]
    }
}

/// Fixed-capacity FIFO buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, next: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `batch` distinct items, or every item when fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&T> {
        let k = batch.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), k).into_iter().map(|i| &self.items[i]).collect()
    }
}
