//! Coupled fixed points of bivariate operators on `R^d`.
//!
//! A pair `(x, y)` is a coupled fixed point of `F` when `F(x, y) = x` and
//! `F(y, x) = y`. This crate provides the double Picard iteration, the
//! diagonal and double Krasnoselskij iterations, an empirical estimator of
//! the weak-nonexpansiveness constants of `F`, closed-form trajectories for
//! the scalar example operators, and trace-level checks of the Fejér and
//! residual inequalities that drive the Krasnoselskij convergence proof.

pub mod cli;
pub mod closed_form;
pub mod contractivity;
pub mod error;
pub mod iteration;
pub mod operators;
pub mod space;

pub use error::{Error, Result};
pub use iteration::{IterationTrace, Scheme, SchemeConfig, Status};
pub use operators::{BivariateOperator, CoupledPair};
pub use space::{BoxDomain, Matrix, Vector};
