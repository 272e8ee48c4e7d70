//! Regularized kernel machines with convex Lipschitz losses, plus tools for
//! measuring how their predictors move under perturbations of the data
//! distribution.

// `!(x > 0.0)` style guards are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod kernels;
pub mod losses;
pub mod measures;
pub mod prokhorov;
pub mod robustness;
pub mod solver;

pub use error::{Error, Result};
pub use kernels::{Kernel, KernelKind, RkhsFunction};
pub use losses::{Loss, LossKind};
pub use measures::{Atom, Dataset, DiscreteMeasure};
pub use solver::{train, SolverOptions, SvmModel};
