//! Dense tensors with reverse-mode automatic differentiation.
//!
//! Only the operations and broadcasting patterns the translation model needs
//! are provided: matrix products, row-bias adds, per-head scalar multiplies,
//! normalizers, rotary embeddings and the batched attention primitives.

pub(crate) mod kernels;
mod tape;
mod tensor;

pub use tape::{AttnShape, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::rope_tables;

#[cfg(test)]
pub(crate) mod gradcheck;
