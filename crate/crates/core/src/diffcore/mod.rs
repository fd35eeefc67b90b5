//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Graphs are rebuilt on every forward pass. Subgradients of `relu` and
//! `abs` at zero are zero.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheck, GradCheckReport, TensorCheck};
pub use tape::{softmax_rows, Gradients, OpKind, Tape, Var};
pub use tensor::{affine_row, axpy, dot, outer_acc, transposed_acc, Tensor};
