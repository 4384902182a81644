use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{ACTION_DIM, GOAL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One stored step. `goal` carries the precision in force when it was collected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub state: [T; STATE_DIM],
    pub action: [T; ACTION_DIM],
    pub next_state: [T; STATE_DIM],
    pub reward: T,
    pub goal: [T; GOAL_DIM],
    /// Set only when the step reached the goal; timeouts stay bootstrapped.
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    cursor: usize,
    items: Vec<Transition<T>>,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, cursor: 0, items: Vec::new() })
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

    /// Next slot to be written once the ring is full.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, transition: Transition<T>) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition<T>> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Batch<T>> {
        let idx = self.sample_indices(rng, n)?;
        Ok(Batch::from_transitions(idx.iter().map(|&i| &self.items[i])))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.capacity == 0 || self.items.len() > self.capacity || self.cursor >= self.capacity {
            return Err(Error::Checkpoint("replay buffer metadata is inconsistent".into()));
        }
        if self.items.len() < self.capacity && self.cursor != self.items.len() % self.capacity {
            return Err(Error::Checkpoint("replay cursor does not match fill count".into()));
        }
        Ok(())
    }
}

/// Row-stacked transitions ready for the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    pub next_states: Array2<T>,
    pub rewards: Array1<T>,
    pub goals: Array2<T>,
    pub terminal: Vec<bool>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions<'a>(transitions: impl IntoIterator<Item = &'a Transition<T>>) -> Self {
        let mut states = Vec::new();
        let mut actions = Vec::new();
        let mut next_states = Vec::new();
        let mut rewards = Vec::new();
        let mut goals = Vec::new();
        let mut terminal = Vec::new();
        for t in transitions {
            states.extend_from_slice(&t.state);
            actions.extend_from_slice(&t.action);
            next_states.extend_from_slice(&t.next_state);
            rewards.push(t.reward);
            goals.extend_from_slice(&t.goal);
            terminal.push(t.terminal);
        }
        let n = rewards.len();
        let mat = |v: Vec<T>, cols: usize| Array2::from_shape_vec((n, cols), v).expect("row-major batch layout");
        Self {
            states: mat(states, STATE_DIM),
            actions: mat(actions, ACTION_DIM),
            next_states: mat(next_states, STATE_DIM),
            rewards: Array1::from_vec(rewards),
            goals: mat(goals, GOAL_DIM),
            terminal,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}
