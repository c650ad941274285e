//! Dense/sparse f64 tensors with tape-based reverse-mode differentiation,
//! the losses used for training, and the Adam optimizer.

mod adam;
mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, Parameter};
pub use gradcheck::finite_difference_check;
pub use sparse::SparseAdjacency;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod op_tests;
