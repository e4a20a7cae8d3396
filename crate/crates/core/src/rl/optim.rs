use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl AdamW {
    pub fn new(lr: f64, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1,
            beta2,
            weight_decay,
            eps: 1e-8,
        }
    }
}

/// First and second moments shaped like the parameters, plus a step count.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &[Tensor]) -> Self {
        OptimizerState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One AdamW step with decoupled weight decay:
/// `p ← p − lr·(m̂ / (sqrt(v̂) + eps) + λ·p)`.
pub fn adamw_step(params: &mut [Tensor], grads: &[Tensor], state: &mut OptimizerState, opt: &AdamW) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimMismatch {
            what: "optimizer tensors",
            expected: params.len(),
            got: grads.len(),
        });
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "adamw",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(opt.beta1, t);
    let c2 = 1.0 - libm::pow(opt.beta2, t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= opt.lr * (m_hat / (libm::sqrt(v_hat) + opt.eps) + opt.weight_decay * p[i]);
        }
    }
    Ok(())
}

/// `target ← (1 − τ)·target + τ·online`, elementwise.
pub fn polyak_update(target: &mut [Tensor], online: &[Tensor], tau: f64) -> Result<()> {
    if target.len() != online.len() {
        return Err(Error::DimMismatch {
            what: "polyak tensors",
            expected: target.len(),
            got: online.len(),
        });
    }
    for (t, o) in target.iter_mut().zip(online) {
        if t.shape() != o.shape() {
            return Err(Error::ShapeMismatch {
                op: "polyak",
                lhs: t.shape().to_vec(),
                rhs: o.shape().to_vec(),
            });
        }
        for (a, b) in t.data_mut().iter_mut().zip(o.data()) {
            *a = (1.0 - tau) * *a + tau * b;
        }
    }
    Ok(())
}
