//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Forward values come from the tape-free kernels in [`ops`]; a [`Tape`]
//! records which kernel produced each value so [`Tape::backward`] can
//! replay the matching adjoint in reverse order.

pub mod ops;
mod tape;
mod tensor;

pub use ops::{Activation, BinaryOp, ReduceOp};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
