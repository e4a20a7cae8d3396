use alloc::vec::Vec;

use super::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Largest relative disagreement between the reverse-mode gradient of a
/// scalar function and central finite differences:
/// `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
///
/// The caller is responsible for choosing `point` away from ReLU kinks.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&mut tape, x)?;
    let analytic = tape.backward(y)?.wrt(&tape, x);

    let eval = |p: Vec<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(point.shape().to_vec(), p)?);
        let y = f(&mut t, x)?;
        Ok(t.value(y).item())
    };

    let mut worst = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.data().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
