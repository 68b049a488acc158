use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reward::Reward;
use crate::array::PhaseVector;
use crate::error::{Error, Result};

/// `(s_t, a_t, r_t, s_{t+1})` where the action is the next state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: PhaseVector,
    pub action: PhaseVector,
    pub reward: Reward,
    pub next_state: PhaseVector,
}

impl Transition {
    pub fn new(state: PhaseVector, action: PhaseVector, reward: Reward) -> Self {
        Self {
            state,
            next_state: action.clone(),
            action,
            reward,
        }
    }
}

/// Bounded FIFO of transitions with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    pub fn push(&mut self, transition: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(transition);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// `batch_size` distinct transitions, or `None` while fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch_size == 0 || self.buffer.len() < batch_size {
            return None;
        }
        Some(
            index::sample(rng, self.buffer.len(), batch_size)
                .into_iter()
                .map(|i| &self.buffer[i])
                .collect(),
        )
    }
}
