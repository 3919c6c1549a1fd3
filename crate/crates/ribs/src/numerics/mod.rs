//! Shared numerical infrastructure: grids, quadrature, sparse direct solves,
//! truncated SVD, noise, and file output.

pub mod grid;
pub mod io;
pub mod noise;
pub mod sparse;
pub mod svd;

pub use grid::{restrict_fine_to_coarse, trapezoid_integral, trapezoid_l2_norm, Grid2D, NodeRegion};
pub use io::fmt_float;
pub use noise::add_gaussian_noise;
pub use sparse::{SparseSystem, RESIDUAL_TOL};
pub use svd::TruncatedSvd;
