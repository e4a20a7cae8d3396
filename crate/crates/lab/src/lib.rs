//! Command-line experiments, checkpoints and file formats for `simba-core`.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod files;

use simba_core::envs::{DistractorWrapper, Pendulum, WrapperSpec};
use simba_core::rng::{derive_seed, splitmix64, Stream};

pub use error::{LabError, Result};

/// Pendulum with optional Gaussian distractor dimensions.
pub type LabEnv = DistractorWrapper<Pendulum>;

/// Build the training environment of run `seed`.
///
/// The pendulum draws from the `Env` stream, distractor scales from the
/// `Wrapper` stream and distractor noise from a seed split off the scale seed.
pub fn make_env(distractors: usize, seed: u64) -> Result<LabEnv> {
    let scale_seed = derive_seed(seed, Stream::Wrapper);
    let spec = WrapperSpec::sample(distractors, scale_seed);
    let env = DistractorWrapper::new(Pendulum::new(derive_seed(seed, Stream::Env)), spec, splitmix64(scale_seed))?;
    Ok(env)
}
