use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::WindowState;
use crate::error::{Error, Result};

/// One environment interaction. `A` is `f64` for continuous agents and an
/// action index for discrete ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

impl<A> Transition<A> {
    pub fn new(state: &WindowState, action: A, reward: f64, next_state: &WindowState, terminal: bool) -> Self {
        Self {
            state: state.to_vec(),
            action,
            reward,
            next_state: next_state.to_vec(),
            terminal,
        }
    }
}

/// Fixed-capacity FIFO store sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    capacity: usize,
    items: Vec<Transition<A>>,
    /// Slot the next insertion overwrites once the buffer is full.
    head: usize,
    rng: ChaCha8Rng,
}

impl<A> ReplayBuffer<A> {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition<A>) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.head] = transition;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition<A>> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    pub fn sample(&mut self, batch_size: usize) -> Result<Vec<&Transition<A>>> {
        if batch_size == 0 || self.items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = self.items.len();
        let idx: Vec<usize> = (0..batch_size).map(|_| self.rng.random_range(0..n)).collect();
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }
}
