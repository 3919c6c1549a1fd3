//! Inverse Born series solvers for inverse problems with discrete internal
//! measurements.
//!
//! The crate reconstructs coefficients of elliptic operators from finitely
//! many weighted interior functionals of the solution. Measurement maps are
//! expanded in a Born series in the unknown perturbation; the series is
//! inverted term by term, and the resulting polynomial solver is either
//! summed once or restarted after every correction, which turns a fixed-order
//! inverse series into a superlinearly convergent iteration.
//!
//! Module layout:
//!
//! * [`numerics`]: grids, quadrature, sparse factorizations, truncated SVD,
//!   noise injection, CSV and PGM output.
//! * [`engine`]: the model-generic series recursion, reversion oracle,
//!   summation and restart drivers, polynomial test models.
//! * [`schrodinger`]: discrete Schrodinger measurement operator with
//!   localized source and receiver wells, its expansion coefficients and
//!   Jacobian.
//! * [`bounds`]: computable convergence-radius and coefficient-norm
//!   estimates for that operator.
//! * [`toy`]: a small dense model reproducing the qualitative convergence
//!   picture at negligible cost.
//! * [`hydro`]: periodic pumping-test reconstruction of hydraulic
//!   conductivity and specific storage, built on the Schrodinger solver via
//!   a Liouville change of variables.

pub mod bounds;
pub mod engine;
pub mod error;
pub mod hydro;
pub mod numerics;
pub mod schrodinger;
pub mod toy;

pub use error::{Error, Result};
