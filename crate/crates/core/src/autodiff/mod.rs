//! Reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! Operations run eagerly and are recorded on a [`Tape`]; [`Tape::backward`]
//! walks the record once in reverse. Parameters live in [`Params`] and are
//! bound onto a fresh tape for every forward pass.

mod check;
pub mod layers;
pub mod losses;
mod optim;
mod params;
mod tape;
mod tensor;

pub use check::{grad_check, relative_error, GradCheckReport, FULL_CHECK_LIMIT};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Bound, Param, ParamGrads, Params};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
