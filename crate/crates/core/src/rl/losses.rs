//! Loss graphs for SAC and DDPG. Each builder records onto a caller-owned
//! tape so the same code serves training and gradient checks.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nets::{self, forward, ForwardOutput, NetworkSpec, ParamVars, Params};
use crate::tensor::Tensor;

/// Per-dimension action bounds of the environment.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::DimMismatch {
                what: "action bounds",
                expected: low.len(),
                got: high.len(),
            });
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(Error::Invalid("action bounds need low < high".into()));
        }
        Ok(Bounds { low, high })
    }

    /// `[-1, 1]` in every dimension.
    pub fn unit(dim: usize) -> Self {
        Bounds {
            low: vec![-1.0; dim],
            high: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    /// Map a policy action in `[-1, 1]` to environment units.
    pub fn scale(&self, a: &[f64]) -> Vec<f64> {
        nets::scale_action(a, &self.low, &self.high)
    }

    /// Differentiable version of [`scale`](Self::scale) for a `[n, |A|]` batch.
    pub fn scale_var(&self, tape: &mut Tape, a: Var) -> Result<Var> {
        let shape = tape.shape(a).to_vec();
        let half: Vec<f64> = self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (h - l)).collect();
        let mid: Vec<f64> = self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (h + l)).collect();
        let half = tape.constant(Tensor::row(half));
        let half = tape.broadcast(half, &shape)?;
        let mid = tape.constant(Tensor::row(mid));
        let mid = tape.broadcast(mid, &shape)?;
        let scaled = tape.mul(a, half)?;
        tape.add(scaled, mid)
    }
}

/// `Q(concat(ō, a))` where `a` is in environment units.
pub fn q_forward(tape: &mut Tape, spec: &NetworkSpec, vars: &ParamVars, obs: Var, action: Var) -> Result<ForwardOutput> {
    let input = tape.concat(&[obs, action], 1)?;
    forward(tape, spec, vars, input)
}

fn q_eval(spec: &NetworkSpec, params: &Params, obs: &Tensor, action: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let o = tape.constant(obs.clone());
    let a = tape.constant(action.clone());
    let out = q_forward(&mut tape, spec, &vars, o, a)?;
    Ok(tape.value(out.head).clone())
}

fn elementwise_min(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x.min(*y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// `y = r + γ(1 − done)·v` row by row.
pub fn td_target(reward: &Tensor, done: &Tensor, next_value: &Tensor, gamma: f64) -> Result<Tensor> {
    let data = reward
        .data()
        .iter()
        .zip(done.data())
        .zip(next_value.data())
        .map(|((r, d), v)| if *d != 0.0 { *r } else { r + gamma * v })
        .collect();
    Tensor::new(reward.shape().to_vec(), data)
}

/// Sum over critics of `mean((Q_i(ō, a) − y)²)`. Returns the loss and the
/// first critic's forward pass.
pub fn critic_loss(
    tape: &mut Tape,
    spec: &NetworkSpec,
    critics: &[&ParamVars],
    obs: &Tensor,
    action: &Tensor,
    target: &Tensor,
) -> Result<(Var, ForwardOutput)> {
    let o = tape.constant(obs.clone());
    let a = tape.constant(action.clone());
    let y = tape.constant(target.clone());
    let mut loss = None;
    let mut first = None;
    for vars in critics {
        let out = q_forward(tape, spec, vars, o, a)?;
        let err = tape.sub(out.head, y)?;
        let sq = tape.square(err)?;
        let mse = tape.mean(sq)?;
        loss = Some(match loss {
            None => mse,
            Some(l) => tape.add(l, mse)?,
        });
        first.get_or_insert(out);
    }
    match (loss, first) {
        (Some(l), Some(f)) => Ok((l, f)),
        _ => Err(Error::Invalid("critic loss needs at least one critic".into())),
    }
}

/// Inputs of the SAC critic target computed without gradients.
pub struct SacTargetInputs<'a> {
    pub actor_spec: &'a NetworkSpec,
    pub actor: &'a Params,
    pub critic_spec: &'a NetworkSpec,
    pub targets: &'a [&'a Params],
    pub alpha: f64,
    pub gamma: f64,
    pub bounds: &'a Bounds,
}

/// `y = r + γ(1 − done)(min_i Q̄_i(ō', a') − α·log π(a'|ō'))` with one fresh
/// reparameterised sample `a'` per row from `noise`.
pub fn sac_target(inp: &SacTargetInputs<'_>, next_obs: &Tensor, reward: &Tensor, done: &Tensor, noise: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = inp.actor.register(&mut tape, false);
    let o = tape.constant(next_obs.clone());
    let out = forward(&mut tape, inp.actor_spec, &vars, o)?;
    let (mean, log_std) = nets::gaussian_params(&mut tape, out.head)?;
    let (a, log_prob) = nets::sample_tanh_gaussian(&mut tape, mean, log_std, noise)?;
    let a_env = inp.bounds.scale_var(&mut tape, a)?;
    let a_env = tape.value(a_env).clone();
    let log_prob = tape.value(log_prob).clone();
    let mut q: Option<Tensor> = None;
    for target in inp.targets {
        let qi = q_eval(inp.critic_spec, target, next_obs, &a_env)?;
        q = Some(match q {
            None => qi,
            Some(prev) => elementwise_min(&prev, &qi)?,
        });
    }
    let q = q.ok_or_else(|| Error::Invalid("sac target needs a target critic".into()))?;
    let soft = Tensor::new(
        q.shape().to_vec(),
        q.data().iter().zip(log_prob.data()).map(|(q, lp)| q - inp.alpha * lp).collect(),
    )?;
    td_target(reward, done, &soft, inp.gamma)
}

/// `mean(α·log π(a|ō) − Q(ō, a))` with `a` reparameterised through `noise`.
/// Critic parameters should be registered as constants. Returns the loss and
/// the per-row log-probabilities.
#[allow(clippy::too_many_arguments)]
pub fn sac_actor_loss(
    tape: &mut Tape,
    actor_spec: &NetworkSpec,
    actor: &ParamVars,
    critic_spec: &NetworkSpec,
    critics: &[&ParamVars],
    obs: &Tensor,
    noise: &Tensor,
    alpha: f64,
    bounds: &Bounds,
) -> Result<(Var, Var)> {
    let o = tape.constant(obs.clone());
    let out = forward(tape, actor_spec, actor, o)?;
    let (mean, log_std) = nets::gaussian_params(tape, out.head)?;
    let (a, log_prob) = nets::sample_tanh_gaussian(tape, mean, log_std, noise)?;
    let a_env = bounds.scale_var(tape, a)?;
    let q = min_q(tape, critic_spec, critics, o, a_env)?;
    let weighted = tape.scale(log_prob, alpha)?;
    let diff = tape.sub(weighted, q)?;
    let loss = tape.mean(diff)?;
    Ok((loss, log_prob))
}

fn min_q(tape: &mut Tape, spec: &NetworkSpec, critics: &[&ParamVars], o: Var, a: Var) -> Result<Var> {
    let mut q = None;
    for vars in critics {
        let qi = q_forward(tape, spec, vars, o, a)?.head;
        q = Some(match q {
            None => qi,
            Some(prev) => tape.minimum(prev, qi)?,
        });
    }
    q.ok_or_else(|| Error::Invalid("actor loss needs a critic".into()))
}

/// `−log α · (mean log π + H*)` for a `[1]` leaf `log_alpha`.
pub fn temperature_loss(tape: &mut Tape, log_alpha: Var, mean_log_prob: f64, target_entropy: f64) -> Result<Var> {
    tape.scale(log_alpha, -(mean_log_prob + target_entropy))
}

/// `y = r + γ(1 − done)·Q̄(ō', π̄(ō'))`.
#[allow(clippy::too_many_arguments)]
pub fn ddpg_target(
    actor_spec: &NetworkSpec,
    target_actor: &Params,
    critic_spec: &NetworkSpec,
    target_critic: &Params,
    next_obs: &Tensor,
    reward: &Tensor,
    done: &Tensor,
    gamma: f64,
    bounds: &Bounds,
) -> Result<Tensor> {
    let head = nets::evaluate(actor_spec, target_actor, next_obs)?;
    let a = bounds_scale_batch(bounds, &head.map(libm::tanh))?;
    let q = q_eval(critic_spec, target_critic, next_obs, &a)?;
    td_target(reward, done, &q, gamma)
}

fn bounds_scale_batch(bounds: &Bounds, a: &Tensor) -> Result<Tensor> {
    let mut out = Vec::with_capacity(a.numel());
    for i in 0..a.rows() {
        out.extend(bounds.scale(a.row_slice(i)));
    }
    Tensor::new(a.shape().to_vec(), out)
}

/// `−mean Q(ō, π(ō))`.
pub fn ddpg_actor_loss(
    tape: &mut Tape,
    actor_spec: &NetworkSpec,
    actor: &ParamVars,
    critic_spec: &NetworkSpec,
    critic: &ParamVars,
    obs: &Tensor,
    bounds: &Bounds,
) -> Result<Var> {
    let o = tape.constant(obs.clone());
    let out = forward(tape, actor_spec, actor, o)?;
    let a = nets::deterministic_action(tape, out.head)?;
    let a_env = bounds.scale_var(tape, a)?;
    let q = q_forward(tape, critic_spec, critic, o, a_env)?.head;
    let m = tape.mean(q)?;
    tape.scale(m, -1.0)
}
