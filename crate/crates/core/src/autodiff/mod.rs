//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records one forward pass. Values are handled through [`Var`]
//! handles; [`Tape::backward`] replays the tape in reverse from a scalar and
//! returns gradients for every leaf that requires them. Trainable tensors live
//! in a [`ParamSet`] outside the tape and are re-bound on every pass, which
//! keeps the tape dynamic (graphs of any node count) and the parameters
//! persistent.
//!
//! Besides the usual dense ops the tape has edge-indexed graph ops over
//! [`Neighborhoods`]: attention logits live in an `E x 1` column, one entry
//! per (node, neighbor) pair, and are normalized with
//! [`Var::masked_neighbor_softmax`].

mod adam;
mod gradcheck;
mod neighbors;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use neighbors::Neighborhoods;
pub use tape::{sigmoid, Gradients, Matrix, Tape, Var};
pub use tensor::{Checkpoint, ParamId, ParamSet, StoredMatrix, Tensor};
