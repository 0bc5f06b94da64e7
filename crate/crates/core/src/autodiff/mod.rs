//! Reverse-mode automatic differentiation over dense `f64` arrays, plus Adam.
//!
//! A [`Tape`] evaluates primitives eagerly and records them; [`Tape::backward`]
//! walks the record in reverse and returns gradients for every trainable
//! parameter registered on the tape.

mod adam;
mod array;
mod gradcheck;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use array::{Array, ParamStore};
pub use gradcheck::{compare_gradients, grad_check, GradCheckReport};
pub use tape::{Primitive, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op} expects {expected}, got {found}")]
    BadArity { op: &'static str, expected: &'static str, found: usize },
    #[error("array of shape {shape:?} needs {expected} values, got {found}")]
    BadLength { shape: Vec<usize>, expected: usize, found: usize },
    #[error("loss node must be scalar, has shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParameter(String),
}
