//! SimBa, the MLP baseline and the component addition/removal variants.
//!
//! SimBa maps a normalised observation through a linear embedding, `L`
//! pre-LN residual feedforward blocks with a 4× inverted bottleneck, and a
//! final layer norm before the head. Critics take `concat(ō, a)` as input.

mod forward;
mod heads;
mod params;
mod spec;

pub use forward::{embed, forward, layer_norm, residual_block, BlockVars, ForwardOutput, LN_EPS};
pub use heads::{
    deterministic_action, gaussian_params, sample_tanh_gaussian, scale_action, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS,
};
pub use params::{orthogonal, ParamVars, Params};
pub use spec::{comparator_depth, count_params, match_hidden_dim, matched_spec, HeadKind, Init, NetworkSpec, Slot, Variant, EXPANSION, OUTPUT_GAIN, RELU_GAIN};

use crate::autodiff::Tape;
use crate::error::Result;
use crate::tensor::Tensor;

/// Evaluate a network on a `[n, input_dim]` batch without keeping the tape.
pub fn evaluate(spec: &NetworkSpec, params: &Params, input: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let x = tape.constant(input.clone());
    let out = forward(&mut tape, spec, &vars, x)?;
    Ok(tape.value(out.head).clone())
}
