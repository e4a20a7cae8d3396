#![no_std]
extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub mod nets;
pub mod rng;
pub mod analysis;
pub mod obs_norm;
pub mod envs;
pub mod rl;
