//! Dense reverse-mode differentiation kernel and optimizer.

mod matrix;
mod optim;
mod params;
mod sparse;
mod tape;

pub mod gradcheck;

pub use matrix::{Matrix, Real};
pub use optim::{Adam, AdamConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use params::{Param, ParamId, ParamKind, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
