//! Reverse-mode automatic differentiation over [`Tensor`](crate::tensor::Tensor)s.
//!
//! A [`Tape`] records primitive applications in execution order; a single
//! tape is not shared across threads, but independent tapes are.

mod check;
mod ops;
mod tape;

pub use check::grad_check;
pub use ops::Primitive;
pub use tape::{Gradients, Tape, Var};
