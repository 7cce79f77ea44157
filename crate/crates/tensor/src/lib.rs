//! Dense row-major tensors with a reverse-mode tape.
//!
//! Forward ops append nodes to a [`Tape`]; [`Tape::backward`] walks them in
//! reverse once and returns leaf gradients. Every reduction runs in a fixed
//! sequential order, so repeated runs give bit-identical results.

pub mod checkpoint;
mod error;
pub mod gradcheck;
mod ops;
mod real;
mod tape;
mod tensor;
mod topk;

pub use error::{Result, TensorError};
pub use ops::elementwise::{broadcast_shape, gelu_scalar};
pub use ops::reduce::softmax;
pub use ops::{BatchNormMode, BatchNormOutput, ConvGeom};
pub use real::{DType, Real};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{contiguous_strides, numel, Tensor};
pub use topk::topk_indices;
