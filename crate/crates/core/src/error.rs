use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: input outside domain (requires strictly positive values, found {value})")]
    Domain { op: &'static str, value: f64 },
    #[error("shape {shape:?} holds {expected} elements but data has {len}")]
    BadShape {
        shape: Vec<usize>,
        expected: usize,
        len: usize,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
