//! In-repo continuous-control environments and observation wrappers.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{normal, rng_from_seed, Rng};

/// Episodes are truncated by the training loop after this many steps.
pub const MAX_EPISODE_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Genuine termination only; time limits are not terminal.
    pub done: bool,
}

pub trait Env {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Per-dimension `(low, high)` action bounds.
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn reset(&mut self) -> Vec<f64>;
    /// Out-of-bounds actions are clipped.
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    fn max_episode_steps(&self) -> usize {
        MAX_EPISODE_STEPS
    }
}

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    /// Radians from upright.
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn observation(&self) -> Vec<f64> {
        vec![libm::cos(self.theta), libm::sin(self.theta), self.theta_dot]
    }
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * libm::floor(theta / two_pi);
    if t > PI {
        t -= two_pi;
    }
    t
}

fn sample_reset(rng: &mut Rng) -> PendulumState {
    // 1 - u lies in (0, 1], so theta covers (−π, π]
    let u: f64 = rng.random();
    let theta = PI - 2.0 * PI * u;
    let theta_dot = rng.random_range(-1.0..=1.0);
    PendulumState { theta, theta_dot }
}

/// Fresh pendulum state drawn from `seed`, with its observation.
pub fn pendulum_reset(seed: u64) -> (PendulumState, Vec<f64>) {
    let state = sample_reset(&mut rng_from_seed(seed));
    (state, state.observation())
}

/// One semi-implicit Euler step. Reward is computed on the pre-step state.
pub fn pendulum_step(state: PendulumState, torque: f64) -> (PendulumState, Step) {
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let th = wrap_angle(state.theta);
    let cost = th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u;
    let acc = 3.0 * GRAVITY / (2.0 * LENGTH) * libm::sin(state.theta) + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let theta_dot = (state.theta_dot + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let theta = wrap_angle(state.theta + theta_dot * DT);
    let next = PendulumState { theta, theta_dot };
    let step = Step {
        obs: next.observation(),
        reward: -cost,
        done: false,
    };
    (next, step)
}

/// Pendulum swing-up. Observation `[cos θ, sin θ, θ̇]`, torque in `[-2, 2]`.
#[derive(Clone, Debug)]
pub struct Pendulum {
    state: PendulumState,
    rng: Rng,
}

impl Pendulum {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let state = sample_reset(&mut rng);
        Pendulum { state, rng }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
    }
}

impl Env for Pendulum {
    fn obs_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-MAX_TORQUE], vec![MAX_TORQUE])
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = sample_reset(&mut self.rng);
        self.state.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if action.len() != 1 {
            return Err(Error::DimMismatch {
                what: "action",
                expected: 1,
                got: action.len(),
            });
        }
        let (next, step) = pendulum_step(self.state, action[0]);
        self.state = next;
        Ok(step)
    }
}

pub const DISTRACTOR_SCALE_MIN: f64 = 1e-2;
pub const DISTRACTOR_SCALE_MAX: f64 = 1e2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperSpec {
    pub distractor_dims: usize,
    pub distractor_scales: Vec<f64>,
    pub true_dim_scales: Option<Vec<f64>>,
}

impl WrapperSpec {
    /// Draw `distractor_dims` scales log-uniformly in `[1e-2, 1e2]`.
    pub fn sample(distractor_dims: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let (lo, hi) = (libm::log(DISTRACTOR_SCALE_MIN), libm::log(DISTRACTOR_SCALE_MAX));
        let distractor_scales = (0..distractor_dims)
            .map(|_| libm::exp(rng.random_range(lo..=hi)))
            .collect();
        WrapperSpec {
            distractor_dims,
            distractor_scales,
            true_dim_scales: None,
        }
    }

    pub fn identity() -> Self {
        WrapperSpec {
            distractor_dims: 0,
            distractor_scales: Vec::new(),
            true_dim_scales: None,
        }
    }

    pub fn validate(&self, inner_dim: usize) -> Result<()> {
        if self.distractor_scales.len() != self.distractor_dims {
            return Err(Error::DimMismatch {
                what: "distractor_scales",
                expected: self.distractor_dims,
                got: self.distractor_scales.len(),
            });
        }
        if let Some(s) = &self.true_dim_scales {
            if s.len() != inner_dim {
                return Err(Error::DimMismatch {
                    what: "true_dim_scales",
                    expected: inner_dim,
                    got: s.len(),
                });
            }
        }
        let all = self.distractor_scales.iter().chain(self.true_dim_scales.iter().flatten());
        if all.into_iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("wrapper", "scales must be positive and finite"));
        }
        Ok(())
    }

    /// `concat(true_dim_scales ⊙ obs, scales ⊙ ξ)` with `ξ ~ N(0, I)` drawn from `rng`.
    pub fn wrap(&self, obs: &[f64], rng: &mut Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(obs.len() + self.distractor_dims);
        match &self.true_dim_scales {
            Some(s) => out.extend(obs.iter().zip(s).map(|(o, s)| o * s)),
            None => out.extend_from_slice(obs),
        }
        out.extend(self.distractor_scales.iter().map(|s| s * normal(rng)));
        out
    }
}

/// Appends scaled Gaussian distractor dimensions to every observation.
#[derive(Clone, Debug)]
pub struct DistractorWrapper<E> {
    inner: E,
    spec: WrapperSpec,
    rng: Rng,
}

impl<E: Env> DistractorWrapper<E> {
    pub fn new(inner: E, spec: WrapperSpec, noise_seed: u64) -> Result<Self> {
        spec.validate(inner.obs_dim())?;
        Ok(DistractorWrapper {
            inner,
            spec,
            rng: rng_from_seed(noise_seed),
        })
    }

    pub fn spec(&self) -> &WrapperSpec {
        &self.spec
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Env> Env for DistractorWrapper<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim() + self.spec.distractor_dims
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.inner.action_bounds()
    }

    fn reset(&mut self) -> Vec<f64> {
        let obs = self.inner.reset();
        self.spec.wrap(&obs, &mut self.rng)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let mut step = self.inner.step(action)?;
        step.obs = self.spec.wrap(&step.obs, &mut self.rng);
        Ok(step)
    }

    fn max_episode_steps(&self) -> usize {
        self.inner.max_episode_steps()
    }
}

impl<E: Env + ?Sized> Env for alloc::boxed::Box<E> {
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).action_bounds()
    }
    fn reset(&mut self) -> Vec<f64> {
        (**self).reset()
    }
    fn step(&mut self, action: &[f64]) -> Result<Step> {
        (**self).step(action)
    }
    fn max_episode_steps(&self) -> usize {
        (**self).max_episode_steps()
    }
}
