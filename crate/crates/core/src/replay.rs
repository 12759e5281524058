//! FIFO replay buffer with uniform sampling, and phantom-action draws.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Already multiplied by the reward scale.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// `log q(action | state)` under the behavior policy, when tracked.
    pub behavior_log_density: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), inserted: 0 })
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

    /// Total number of pushes, including evicted transitions.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.reward.is_finite() {
            return Err(Error::contract(format!("non-finite reward {}", t.reward)));
        }
        if let Some(first) = self.items.front() {
            if first.state.len() != t.state.len()
                || first.action.len() != t.action.len()
                || first.next_state.len() != t.next_state.len()
            {
                return Err(Error::contract("transition widths differ from buffer contents"));
            }
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `batch_size` draws, uniform with replacement.
    pub fn sample_batch(&self, batch_size: usize, rng: &mut SeededRng) -> Result<Vec<Transition>> {
        if batch_size == 0 || self.items.len() < batch_size.min(self.capacity) || self.items.is_empty() {
            return Err(Error::NotReady { available: self.items.len(), requested: batch_size });
        }
        let n = self.items.len();
        Ok((0..batch_size).map(|_| self.items[rng.random_range(0..n)].clone()).collect())
    }
}

/// Draws `a_k ~ N(stored action_k, diag(variance(state_k)))` for each row.
pub fn phantom_actions<F>(batch: &[Transition], mut variance: F, rng: &mut SeededRng) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    batch
        .iter()
        .map(|t| {
            let var = variance(&t.state);
            t.action
                .iter()
                .zip(&var)
                .map(|(a, v)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    a + v.sqrt() * eps
                })
                .collect()
        })
        .collect()
}
