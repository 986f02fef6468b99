//! Minimal dense tensors with reverse-mode differentiation.

pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use params::{ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
