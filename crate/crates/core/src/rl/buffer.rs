use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// A sampled minibatch; every field is `[n, ·]`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Tensor,
    pub action: Tensor,
    pub reward: Tensor,
    pub next_obs: Tensor,
    pub done: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.reward.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_transitions(items: &[Transition]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let obs: Vec<&[f64]> = items.iter().map(|t| t.obs.as_slice()).collect();
        let action: Vec<&[f64]> = items.iter().map(|t| t.action.as_slice()).collect();
        let next: Vec<&[f64]> = items.iter().map(|t| t.next_obs.as_slice()).collect();
        let n = items.len();
        Ok(Batch {
            obs: Tensor::from_rows(&obs)?,
            action: Tensor::from_rows(&action)?,
            reward: Tensor::new(vec![n, 1], items.iter().map(|t| t.reward).collect())?,
            next_obs: Tensor::from_rows(&next)?,
            done: Tensor::new(vec![n, 1], items.iter().map(|t| f64::from(u8::from(t.done))).collect())?,
        })
    }
}

/// Fixed-capacity ring buffer of raw transitions, stored column-wise.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    obs: Vec<f64>,
    action: Vec<f64>,
    reward: Vec<f64>,
    next_obs: Vec<f64>,
    done: Vec<bool>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer_capacity", "must be at least 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            obs_dim,
            action_dim,
            obs: Vec::new(),
            action: Vec::new(),
            reward: Vec::new(),
            next_obs: Vec::new(),
            done: Vec::new(),
            len: 0,
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        for (what, expected, got) in [
            ("obs", self.obs_dim, t.obs.len()),
            ("next_obs", self.obs_dim, t.next_obs.len()),
            ("action", self.action_dim, t.action.len()),
        ] {
            if expected != got {
                return Err(Error::DimMismatch { what, expected, got });
            }
        }
        if self.len < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.action.extend_from_slice(&t.action);
            self.reward.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.done.push(t.done);
            self.len += 1;
        } else {
            let i = self.head;
            let (d, a) = (self.obs_dim, self.action_dim);
            self.obs[i * d..(i + 1) * d].copy_from_slice(&t.obs);
            self.action[i * a..(i + 1) * a].copy_from_slice(&t.action);
            self.reward[i] = t.reward;
            self.next_obs[i * d..(i + 1) * d].copy_from_slice(&t.next_obs);
            self.done[i] = t.done;
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    /// Transition at storage slot `i`.
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let (d, a) = (self.obs_dim, self.action_dim);
        Some(Transition {
            obs: self.obs[i * d..(i + 1) * d].to_vec(),
            action: self.action[i * a..(i + 1) * a].to_vec(),
            reward: self.reward[i],
            next_obs: self.next_obs[i * d..(i + 1) * d].to_vec(),
            done: self.done[i],
        })
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.head };
        (0..self.len).map(move |k| self.get((start + k) % self.capacity).unwrap())
    }

    /// `n` slot indices drawn uniformly with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::Invalid("empty minibatch".into()));
        }
        let (d, a, n) = (self.obs_dim, self.action_dim, indices.len());
        let mut obs = Vec::with_capacity(n * d);
        let mut action = Vec::with_capacity(n * a);
        let mut next_obs = Vec::with_capacity(n * d);
        let mut reward = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        for &i in indices {
            if i >= self.len {
                return Err(Error::Invalid(alloc::format!("slot {i} out of range")));
            }
            obs.extend_from_slice(&self.obs[i * d..(i + 1) * d]);
            action.extend_from_slice(&self.action[i * a..(i + 1) * a]);
            next_obs.extend_from_slice(&self.next_obs[i * d..(i + 1) * d]);
            reward.push(self.reward[i]);
            done.push(f64::from(u8::from(self.done[i])));
        }
        Ok(Batch {
            obs: Tensor::new(vec![n, d], obs)?,
            action: Tensor::new(vec![n, a], action)?,
            reward: Tensor::new(vec![n, 1], reward)?,
            next_obs: Tensor::new(vec![n, d], next_obs)?,
            done: Tensor::new(vec![n, 1], done)?,
        })
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        self.gather(&idx)
    }
}
