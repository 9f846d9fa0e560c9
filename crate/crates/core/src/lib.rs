//! Finite elements and well-posedness diagnostics for the damped
//! time-harmonic Galbrun equation.

// Index loops mirror the matrix formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod assembly;
pub mod cli;
pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod helmholtz;
pub mod linalg;
pub mod mesh_fem;
pub mod solver;

pub use error::{Error, Result};
pub use faer::c64;
