//! Implicit (stochastic) gradient descent for physics-informed networks.

pub mod autodiff;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod network;
pub mod optimizers;
pub mod problems;
pub mod theory;

pub use error::{Error, Result};
