//! Sums of translates of concave, singular kernels on the torus: arc maxima,
//! equioscillation, minimax and maximin over node simplices, and the
//! polynomial applications built on top of them.

// `!(a > b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ext;
pub mod kernels;
pub mod torus;
pub mod evaluator;
pub mod solver;
pub mod oracle;
pub mod apps;
pub mod cli;

pub use error::{Error, Result};
pub use evaluator::Problem;
pub use kernels::KernelSpec;
pub use torus::{NodeSystem, Permutation};
