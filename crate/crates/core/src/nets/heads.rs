//! Policy and value heads on top of [`forward`](super::forward).
//!
//! Policies act in the normalised box `[-1, 1]^|A|`; [`scale_action`] maps
//! to environment bounds.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Stabiliser inside `log(1 - tanh(u)^2 + ε)`.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Split a gaussian-policy head `[n, 2a]` into `(mean, clamped log_std)`.
pub fn gaussian_params(tape: &mut Tape, head: Var) -> Result<(Var, Var)> {
    let width = tape.shape(head)[1];
    if width % 2 != 0 {
        return Err(Error::Invalid("gaussian head needs an even width".into()));
    }
    let a = width / 2;
    let mean = tape.slice(head, 1, 0, a)?;
    let raw = tape.slice(head, 1, a, width)?;
    let log_std = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX)?;
    Ok((mean, log_std))
}

/// Reparameterised tanh-Gaussian sample `tanh(mean + exp(log_std)·noise)`
/// and its log-density `[n, 1]` including the tanh change of variables.
pub fn sample_tanh_gaussian(tape: &mut Tape, mean: Var, log_std: Var, noise: &Tensor) -> Result<(Var, Var)> {
    let shape = tape.shape(mean).to_vec();
    if noise.shape() != shape.as_slice() {
        return Err(Error::ShapeMismatch {
            op: "policy noise",
            lhs: shape,
            rhs: noise.shape().to_vec(),
        });
    }
    let eps = tape.constant(noise.clone());
    let std = tape.exp(log_std)?;
    let scaled = tape.mul(std, eps)?;
    let pre = tape.add(mean, scaled)?;
    let action = tape.tanh(pre)?;

    // log N(pre; mean, std) = -ε²/2 - log_std - log(2π)/2, per dimension
    let base: Vec<f64> = noise.data().iter().map(|e| -0.5 * e * e - HALF_LOG_2PI).collect();
    let base = tape.constant(Tensor::new(shape.clone(), base)?);
    let gauss = tape.sub(base, log_std)?;
    let sq = tape.square(action)?;
    let one_minus = tape.scale(sq, -1.0)?;
    let one_minus = tape.add_scalar(one_minus, 1.0 + SQUASH_EPS)?;
    let log_det = tape.log(one_minus)?;
    let per_dim = tape.sub(gauss, log_det)?;
    let log_prob = tape.sum_axis(per_dim, 1)?;
    Ok((action, log_prob))
}

/// `tanh(head)` for deterministic policies.
pub fn deterministic_action(tape: &mut Tape, head: Var) -> Result<Var> {
    tape.tanh(head)
}

/// Map an action from `[-1, 1]` onto `[low, high]` per dimension.
pub fn scale_action(action: &[f64], low: &[f64], high: &[f64]) -> Vec<f64> {
    action
        .iter()
        .zip(low.iter().zip(high))
        .map(|(&a, (&lo, &hi))| lo + 0.5 * (a.clamp(-1.0, 1.0) + 1.0) * (hi - lo))
        .collect()
}
