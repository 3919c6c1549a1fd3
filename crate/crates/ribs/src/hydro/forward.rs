//! Frequency-domain head simulation and the change of variables that maps
//! it onto the Schrodinger problem.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{AquiferParams, ComplexPotential, FreqMeasurement};
use crate::error::Result;
use crate::numerics::{Grid2D, SparseSystem};
use crate::schrodinger::model::{measure, weighted_wells, well_rhs};
use crate::schrodinger::{PotentialField, WellFields};

/// Triplets of `div(sigma grad .) - i omega S` on interior nodes, Dirichlet
/// rows eliminated. Edge conductivities are arithmetic means of the two
/// adjacent node values, which keeps the operator symmetric.
pub fn conduction_triplets(
    grid: Grid2D,
    sigma: &DVector<f64>,
    omega: f64,
    storage: &DVector<f64>,
) -> Vec<(usize, usize, Complex64)> {
    let h2 = grid.h() * grid.h();
    let mut trips = Vec::with_capacity(5 * grid.n_interior());
    for (k, l) in grid.interior_nodes() {
        let row = grid.interior_index(k, l);
        let here = sigma[grid.node_index(k, l)];
        let mut edge_sum = 0.0;
        for (nk, nl) in [(k - 1, l), (k + 1, l), (k, l - 1), (k, l + 1)] {
            let edge = 0.5 * (here + sigma[grid.node_index(nk, nl)]);
            edge_sum += edge;
            if grid.is_interior(nk, nl) {
                trips.push((row, grid.interior_index(nk, nl), Complex64::new(edge / h2, 0.0)));
            }
        }
        let s = storage[grid.node_index(k, l)];
        trips.push((row, row, Complex64::new(-edge_sum / h2, -omega * s)));
    }
    trips
}

/// Solves the head problem once per well and assembles the measurement
/// matrix `Mhat_ij = <phi_j, u_i>` by trapezoid quadrature.
pub fn hydro_forward(
    params: &AquiferParams,
    omega: f64,
    wells: &WellFields,
) -> Result<FreqMeasurement> {
    let grid = params.grid();
    assert_eq!(grid.n_cells(), wells.grid().n_cells(), "wells and aquifer share a grid");
    let trips = conduction_triplets(grid, params.sigma(), omega, params.storage());
    let system = SparseSystem::factorize(grid.n_interior(), &trips)?;
    let fields = system.solve_many(&well_rhs(grid, wells))?;
    Ok(FreqMeasurement { omega, mhat: measure(&weighted_wells(grid, wells), &fields) })
}

/// The complex potential of the transformed problem,
/// `Q = lap_h(s)/s + i omega S / sigma` with `s = sigma^{1/2}`.
///
/// The five-point Laplacian at interior nodes next to the boundary reads
/// the known boundary conductivity; boundary entries of `Q` are left at
/// zero.
pub fn liouville_potential(params: &AquiferParams, omega: f64) -> ComplexPotential {
    let grid = params.grid();
    let s = params.sqrt_sigma();
    let h2 = grid.h() * grid.h();
    let mut q = DVector::zeros(grid.n_nodes());
    for (k, l) in grid.interior_nodes() {
        let idx = grid.node_index(k, l);
        let lap = (s[grid.node_index(k - 1, l)]
            + s[grid.node_index(k + 1, l)]
            + s[grid.node_index(k, l - 1)]
            + s[grid.node_index(k, l + 1)]
            - 4.0 * s[idx])
            / h2;
        q[idx] = Complex64::new(lap / s[idx], omega * params.storage()[idx] / params.sigma()[idx]);
    }
    ComplexPotential { omega, field: PotentialField::from_values(grid, q) }
}
