//! Dense-tensor reverse-mode automatic differentiation.
//!
//! A [`Tape`] records operations on [`Tensor`] values as they are evaluated.
//! Parameters live in a [`ParameterSet`] and are bound onto a fresh tape for
//! each step; [`Tape::backward`] returns their gradients, which an
//! [`AdamState`] then applies.

mod adam;
pub mod gradcheck;
mod params;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use params::ParameterSet;
pub use rng::SeededRng;
pub use tape::{BinaryOp, Gradients, ReduceOp, Tape, UnaryOp, Var};
pub use tensor::Tensor;

pub(crate) use tape::{log_sum_exp, sign};
