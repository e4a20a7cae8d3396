use alloc::vec::Vec;

use super::params::ParamVars;
use super::spec::{NetworkSpec, Variant};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

/// Outputs of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Pre-head features (`z` for SimBa).
    pub features: Var,
    /// Post-ReLU activations used for dormant-neuron statistics.
    pub activations: Vec<Var>,
    /// Raw head output, `[n, head_width]`.
    pub head: Var,
}

/// Layer normalisation over features with learnable gain and bias.
pub fn layer_norm(tape: &mut Tape, x: Var, gain: Var, bias: Var) -> Result<Var> {
    tape.layer_norm(x, Some((gain, bias)), LN_EPS)
}

/// `x¹ = ō · W + b`.
pub fn embed(tape: &mut Tape, obs: Var, w: Var, b: Var) -> Result<Var> {
    let (obs_dim, w_rows) = (tape.shape(obs)[1], tape.shape(w)[0]);
    if obs_dim != w_rows {
        return Err(Error::DimMismatch {
            what: "embed input",
            expected: w_rows,
            got: obs_dim,
        });
    }
    tape.linear(obs, w, b)
}

/// Parameters of one pre-LN feedforward block.
#[derive(Clone, Copy, Debug)]
pub struct BlockVars {
    pub ln: Option<(Var, Var)>,
    pub fc1: (Var, Var),
    pub fc2: (Var, Var),
}

/// `x + W2·relu(W1·LN(x) + b1) + b2`. Without `residual` the `x +` is
/// dropped; with `ln == None` the branch sees `x` directly. Also returns the
/// post-ReLU hidden activation.
pub fn residual_block(tape: &mut Tape, x: Var, p: BlockVars, residual: bool) -> Result<(Var, Var)> {
    let width = tape.shape(x)[1];
    let expected = tape.shape(p.fc1.0)[0];
    if width != expected {
        return Err(Error::DimMismatch {
            what: "residual block input",
            expected,
            got: width,
        });
    }
    let normed = match p.ln {
        Some((g, b)) => layer_norm(tape, x, g, b)?,
        None => x,
    };
    let h = tape.linear(normed, p.fc1.0, p.fc1.1)?;
    let h = tape.relu(h)?;
    let branch = tape.linear(h, p.fc2.0, p.fc2.1)?;
    let out = if residual { tape.add(x, branch)? } else { branch };
    Ok((out, h))
}

struct Cursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<Var> {
        let v = self
            .vars
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Invalid("parameter set too short for network spec".into()))?;
        self.pos += 1;
        Ok(v)
    }

    fn pair(&mut self) -> Result<(Var, Var)> {
        Ok((self.next()?, self.next()?))
    }
}

/// Forward pass of any variant on a `[n, input_dim]` batch.
pub fn forward(tape: &mut Tape, spec: &NetworkSpec, params: &ParamVars, input: Var) -> Result<ForwardOutput> {
    let got = tape.shape(input);
    if got.len() != 2 || got[1] != spec.input_dim {
        return Err(Error::DimMismatch {
            what: "network input",
            expected: spec.input_dim,
            got: *got.last().unwrap_or(&0),
        });
    }
    let mut p = Cursor {
        vars: &params.0,
        pos: 0,
    };
    let mut activations = Vec::new();
    let features = match spec.variant {
        Variant::Mlp | Variant::MlpLn => {
            let (w, b) = p.pair()?;
            let mut h = tape.linear(input, w, b)?;
            h = tape.relu(h)?;
            activations.push(h);
            for _ in 1..spec.num_blocks {
                if spec.variant == Variant::MlpLn {
                    let (g, b) = p.pair()?;
                    h = layer_norm(tape, h, g, b)?;
                }
                let (w, b) = p.pair()?;
                h = tape.linear(h, w, b)?;
                h = tape.relu(h)?;
                activations.push(h);
            }
            if spec.variant == Variant::MlpLn {
                let (g, b) = p.pair()?;
                h = layer_norm(tape, h, g, b)?;
            }
            h
        }
        Variant::MlpRes => {
            let (w, b) = p.pair()?;
            let mut h = tape.linear(input, w, b)?;
            h = tape.relu(h)?;
            for _ in 0..spec.num_blocks {
                let (wa, ba) = p.pair()?;
                let (wb, bb) = p.pair()?;
                let a = tape.linear(h, wa, ba)?;
                let a = tape.relu(a)?;
                activations.push(a);
                let branch = tape.linear(a, wb, bb)?;
                let branch = tape.relu(branch)?;
                h = tape.add(h, branch)?;
            }
            h
        }
        Variant::Simba | Variant::SimbaNoResidual | Variant::SimbaNoPreLn | Variant::SimbaNoPostLn => {
            let (w, b) = p.pair()?;
            let mut x = embed(tape, input, w, b)?;
            for _ in 0..spec.num_blocks {
                let ln = if spec.variant == Variant::SimbaNoPreLn {
                    None
                } else {
                    Some(p.pair()?)
                };
                let block = BlockVars {
                    ln,
                    fc1: p.pair()?,
                    fc2: p.pair()?,
                };
                let (next, hidden) = residual_block(tape, x, block, spec.variant != Variant::SimbaNoResidual)?;
                activations.push(hidden);
                x = next;
            }
            if spec.variant == Variant::SimbaNoPostLn {
                x
            } else {
                let (g, b) = p.pair()?;
                layer_norm(tape, x, g, b)?
            }
        }
    };
    let (w, b) = p.pair()?;
    let head = tape.linear(features, w, b)?;
    if p.pos != params.0.len() {
        return Err(Error::Invalid("parameter set longer than network spec".into()));
    }
    Ok(ForwardOutput {
        features,
        activations,
        head,
    })
}
