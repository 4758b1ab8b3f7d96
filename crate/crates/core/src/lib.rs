//! Simulation of fully adaptive bandit data collection and Monte Carlo
//! verification of bias and risk bounds for the sample mean.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arms;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numeric;
pub mod policies;
pub mod protocol;
pub mod rng;
pub mod subpsi;

pub use arms::{ArmSpec, Family};
pub use error::{Error, Result};
pub use subpsi::{LogPartition, PsiFamily};
