//! Shape-constrained B-spline regression.
//!
//! The estimator fits B-spline coefficients subject to a nonnegative
//! `m`-th derivative constraint (monotone for `m = 1`, convex for `m = 2`,
//! and so on) by weighted least squares. Besides the fitting code the crate
//! exposes the full matrix machinery used to certify that the data-to-
//! coefficient map is Lipschitz in the sup-norm with a constant that does
//! not grow with the sample size, and an experiment harness that measures
//! each of the associated bounds.
//!
//! Index convention: the mathematical objects are naturally 1-based
//! (B-splines `B_{p,1..K+p-1}`, constraint rows `1..K-1`). All vectors and
//! matrices here are stored 0-based, so entry `i` of a stored vector is the
//! object with 1-based index `i + 1`. Knot positions keep their signed
//! 1-based indices and are read through [`splines::KnotSequence::knot`],
//! which applies the clamped extension rule.

// NaN inputs must fail range checks, so `!(x > 0.0)` style tests are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod qp;
pub mod quadrature;
pub mod rng;
pub mod shapeops;
pub mod splines;

pub use error::{Error, Result};
