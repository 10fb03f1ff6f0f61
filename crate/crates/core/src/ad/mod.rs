//! Dense reverse-mode automatic differentiation over `f64` matrices, the
//! Adam optimizer and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod init;
mod tape;

use thiserror::Error;

pub use adam::{Adam, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error};
pub use init::{glorot_uniform, seeded_rng};
pub use tape::{Index, Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: index list has length {got}, expected {expected}")]
    LengthMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("segment {segment} has no rows")]
    EmptySegment { segment: usize },
    #[error("backward needs a 1x1 loss, got shape {shape:?}")]
    NonScalarLoss { shape: (usize, usize) },
}
