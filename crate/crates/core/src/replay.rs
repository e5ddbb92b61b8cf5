//! Proportional prioritized experience replay over a sum tree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::OBS_DIM;

pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

/// Binary tree over leaf priorities. Internal nodes hold sums; a parallel
/// tree holds maxima so the largest leaf is available in O(1).
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self { leaves, sums: vec![0.0; 2 * leaves], maxes: vec![0.0; 2 * leaves] }
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    /// Grows the tree to hold at least `capacity` leaves, keeping values.
    pub fn grow(&mut self, capacity: usize) {
        if capacity <= self.leaves {
            return;
        }
        let mut bigger = SumTree::new(capacity);
        for i in 0..self.leaves {
            let node = bigger.leaves + i;
            bigger.sums[node] = self.sums[self.leaves + i];
            bigger.maxes[node] = self.maxes[self.leaves + i];
        }
        for node in (1..bigger.leaves).rev() {
            bigger.sums[node] = bigger.sums[2 * node] + bigger.sums[2 * node + 1];
            bigger.maxes[node] = bigger.maxes[2 * node].max(bigger.maxes[2 * node + 1]);
        }
        *self = bigger;
    }

    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    pub fn max(&self) -> f64 {
        self.maxes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.sums[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut node = self.leaves + i;
        self.sums[node] = value;
        self.maxes[node] = value;
        while node > 1 {
            node /= 2;
            self.sums[node] = self.sums[2 * node] + self.sums[2 * node + 1];
            self.maxes[node] = self.maxes[2 * node].max(self.maxes[2 * node + 1]);
        }
    }

    /// Leaf whose cumulative range contains `mass`, skipping zero-mass leaves.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            if mass < self.sums[left] || self.sums[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.sums[left];
                node = left + 1;
            }
        }
        node - self.leaves
    }

    /// Largest relative deviation between an internal node and its children's sum.
    pub fn consistency_error(&self) -> f64 {
        (1..self.leaves)
            .map(|n| {
                let s = self.sums[2 * n] + self.sums[2 * n + 1];
                (self.sums[n] - s).abs() / s.abs().max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epsilon: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { capacity: 100_000, alpha: 0.6, beta_start: 0.4, beta_end: 1.0, epsilon: 0.01 }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        if !(self.alpha >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("replay alpha must be >= 0 and epsilon > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.beta_start) || !(0.0..=1.0).contains(&self.beta_end) {
            return Err(Error::InvalidConfig("replay beta must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Linear beta schedule, `progress` in [0, 1].
    pub fn beta_at(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.beta_start + (self.beta_end - self.beta_start) * p
    }
}

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub items: Vec<T>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

const INITIAL_LEAVES: usize = 1024;

/// Ring buffer with proportional priorities. The tree stores `p^alpha`, so
/// alpha is fixed for the lifetime of the buffer.
#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    capacity: usize,
    alpha: f64,
    items: Vec<T>,
    priorities: Vec<f64>,
    tree: SumTree,
    raw_max: SumTree,
    cursor: usize,
}

impl<T: Clone> PrioritizedReplay<T> {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            alpha,
            items: Vec::new(),
            priorities: Vec::new(),
            tree: SumTree::new(capacity.min(INITIAL_LEAVES)),
            raw_max: SumTree::new(capacity.min(INITIAL_LEAVES)),
            cursor: 0,
        }
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

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.priorities[index]
    }

    pub fn get(&self, index: usize) -> &T {
        &self.items[index]
    }

    /// Stored items oldest first.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Largest stored raw priority, or 1.0 when empty.
    pub fn max_priority(&self) -> f64 {
        if self.is_empty() {
            1.0
        } else {
            self.raw_max.max()
        }
    }

    pub fn push(&mut self, item: T, priority: f64) {
        assert!(priority >= 0.0 && priority.is_finite(), "priority must be finite and >= 0");
        let i = self.cursor;
        if i >= self.tree.leaves() {
            let want = (2 * self.tree.leaves()).min(self.capacity);
            self.tree.grow(want);
            self.raw_max.grow(want);
        }
        if i == self.items.len() {
            self.items.push(item);
            self.priorities.push(priority);
        } else {
            self.items[i] = item;
            self.priorities[i] = priority;
        }
        self.tree.set(i, priority.powf(self.alpha));
        self.raw_max.set(i, priority);
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Inserts with the current max priority.
    pub fn push_new(&mut self, item: T) {
        let p = self.max_priority();
        self.push(item, p);
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    /// Stratified proportional sample with normalized importance weights.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Batch<T>> {
        let size = self.len();
        if size < batch || batch == 0 {
            return Err(Error::NotEnoughSamples { size, batch });
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let mut indices = Vec::with_capacity(batch);
        for k in 0..batch {
            let mass = segment * (k as f64 + rng.gen::<f64>());
            let mut j = self.tree.find(mass.min(total * (1.0 - 1e-12)));
            if j >= size {
                j = size - 1;
            }
            indices.push(j);
        }
        let raw: Vec<f64> = indices
            .iter()
            .map(|&j| {
                let p = self.probability(j);
                if beta == 0.0 {
                    1.0
                } else {
                    (size as f64 * p).powf(-beta)
                }
            })
            .collect();
        let max_w = raw.iter().copied().fold(0.0, f64::max);
        let weights = raw.iter().map(|w| w / max_w).collect();
        let items = indices.iter().map(|&j| self.items[j].clone()).collect();
        Ok(Batch { items, indices, weights })
    }

    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64], epsilon: f64) {
        for (&j, td) in indices.iter().zip(td_errors) {
            assert!(j < self.len(), "replay index {j} out of range");
            let p = td.abs() + epsilon;
            self.priorities[j] = p;
            self.tree.set(j, p.powf(self.alpha));
            self.raw_max.set(j, p);
        }
    }
}
