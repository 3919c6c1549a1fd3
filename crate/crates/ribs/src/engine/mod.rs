//! Inverse Born series engine.
//!
//! The engine is generic over a [`ForwardModel`]: any map exposing its
//! multilinear expansion coefficients and a regularized inverse of the linear
//! one. On top of that interface it provides the inverse-series term
//! recursion ([`series`]), plain summation and restarted iterations
//! ([`iterate`]), classical scalar series reversion as an oracle
//! ([`reversion`]), and exact polynomial models for testing ([`poly`]).

pub mod iterate;
pub mod model;
pub mod poly;
pub mod reversion;
pub mod series;

pub use iterate::{
    chebyshev_halley_run, gauss_newton_run, inverse_series_sum, ribs_run, IterationTrace,
    SolverOptions, TraceStep,
};
pub use model::{data_norm, param_norm, vec_data, Data, ForwardModel, LinearInverse, Param};
pub use poly::PolynomialModel;
pub use reversion::revert_power_series;
pub use series::{compositions, forward_series_sum, series_step, SeriesEvaluator, DEFAULT_MAX_ORDER};
