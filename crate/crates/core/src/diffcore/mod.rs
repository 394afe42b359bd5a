//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! ```
//! use rvae::diffcore::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let w = g.param(Tensor::vector(vec![1.0, 2.0]));
//! let loss = w.mul(w).unwrap().sum().unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.wrt(w).data(), &[2.0, 4.0]);
//! ```
//!
//! Broadcasting is limited to [`Var::add_row`] (bias rows). Every op checks
//! its output for non-finite values and reports which op produced them.

mod graph;
mod tensor;

pub mod gradcheck;

pub use graph::{Gradients, Graph, OpKind, Var, LOG_FLOOR};
pub use tensor::Tensor;

#[cfg(test)]
use graph::sigmoid;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: OpKind,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} elements")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    Axis { op: OpKind, axis: usize, rank: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: OpKind },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("variable belongs to a different graph")]
    ForeignVar,
}
