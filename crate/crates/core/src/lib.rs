//! Sparse, low-rank, dual-aspect self-attention transformer for
//! remaining-useful-lifetime regression, with the preprocessing pipeline,
//! a synthetic two-stage EDFA degradation generator, and a training and
//! evaluation harness.

pub mod attention;
pub mod data;
pub mod edfa;
pub mod error;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
