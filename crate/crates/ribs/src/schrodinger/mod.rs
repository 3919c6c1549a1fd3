//! Schrodinger problem with discrete internal measurements.
//!
//! Sources and receivers are the same family of compactly supported bump
//! functions (wells). The forward map sends a nodal potential to the matrix
//! of weighted field averages; [`SchrodingerModel`] exposes its multilinear
//! expansion to the series engine.

pub mod model;
pub mod potential;
pub mod wells;

pub use model::{
    assemble_operator, forward_map, operator_triplets, scatter_region, SchrodingerModel,
};
pub use potential::PotentialField;
pub use wells::{bump, WellFields, WellSet, WELL_RADIUS};
