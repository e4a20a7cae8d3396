use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::spec::{Init, NetworkSpec};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{normal, rng_from_seed, Rng};
use crate::tensor::Tensor;

/// Named learnable tensors of one network, in forward order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    seed: u64,
}

/// Tape handles for a [`Params`] set, in the same order.
#[derive(Clone, Debug)]
pub struct ParamVars(pub Vec<Var>);

impl Params {
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for slot in spec.layout() {
            let [rows, cols] = slot.shape;
            let data = match slot.init {
                Init::Zeros => vec![0.0; rows * cols],
                Init::Ones => vec![1.0; rows * cols],
                Init::Orthogonal(gain) => orthogonal(rows, cols, gain, &mut rng),
            };
            names.push(slot.name);
            tensors.push(Tensor::new(vec![rows, cols], data)?);
        }
        Ok(Params { names, tensors, seed })
    }

    /// Fresh parameters for the same architecture drawn from `seed`.
    pub fn reset(&self, spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let fresh = Params::init(spec, seed)?;
        if fresh.names != self.names {
            return Err(Error::Invalid("reset: spec does not match parameter layout".into()));
        }
        Ok(fresh)
    }

    /// Rebuild from stored tensors, checking them against the layout of `spec`.
    pub fn from_parts(spec: &NetworkSpec, tensors: Vec<Tensor>, seed: u64) -> Result<Self> {
        let layout = spec.layout();
        if layout.len() != tensors.len() {
            return Err(Error::DimMismatch {
                what: "parameter tensors",
                expected: layout.len(),
                got: tensors.len(),
            });
        }
        for (slot, t) in layout.iter().zip(&tensors) {
            if t.shape() != slot.shape {
                return Err(Error::ShapeMismatch {
                    op: "params",
                    lhs: slot.shape.to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        Ok(Params {
            names: layout.into_iter().map(|s| s.name).collect(),
            tensors,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Record every tensor on `tape`; `trainable` controls whether they
    /// receive gradients.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        ParamVars(
            self.tensors
                .iter()
                .map(|t| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) })
                .collect(),
        )
    }
}

/// A `rows × cols` matrix with orthonormal rows or columns (whichever are
/// fewer), scaled by `gain`. Gaussian draws are orthonormalised with two
/// passes of modified Gram–Schmidt.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<f64> {
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    for _ in 0..short {
        let mut v: Vec<f64> = (0..long).map(|_| normal(rng)).collect();
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = gain * if rows >= cols { basis[j][i] } else { basis[i][j] };
        }
    }
    out
}
