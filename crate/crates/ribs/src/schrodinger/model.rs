//! Measurement operator of the Dirichlet problem `(-lap + q) u_i = phi_i`
//! and its expansion in the potential perturbation.
//!
//! The data matrix is `D_ij = <phi_j, u_i>` with trapezoid quadrature. The
//! perturbation lives on a margin region strictly inside the domain; the
//! degree-`n` expansion coefficient applies alternating solve-multiply
//! chains to the cached well fields, and the linearization has the closed
//! form `-w_y u_i(y) u_j(y)` over region nodes `y`, which the
//! finite-difference tests pin down sign and all.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::potential::PotentialField;
use super::wells::WellFields;
use crate::engine::{Data, ForwardModel, LinearInverse, Param};
use crate::error::{Error, Result};
use crate::numerics::{Grid2D, NodeRegion, SparseSystem};

/// Triplets of `-lap_h + diag(q)` on interior nodes, homogeneous Dirichlet
/// rows eliminated. `q` holds all node values; only interior ones enter.
pub fn operator_triplets(grid: Grid2D, q: &DVector<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let h2 = grid.h() * grid.h();
    let diag = 4.0 / h2;
    let off = Complex64::new(-1.0 / h2, 0.0);
    let mut trips = Vec::with_capacity(5 * grid.n_interior());
    for (k, l) in grid.interior_nodes() {
        let row = grid.interior_index(k, l);
        trips.push((row, row, Complex64::new(diag, 0.0) + q[grid.node_index(k, l)]));
        for (nk, nl) in [(k - 1, l), (k + 1, l), (k, l - 1), (k, l + 1)] {
            if grid.is_interior(nk, nl) {
                trips.push((row, grid.interior_index(nk, nl), off));
            }
        }
    }
    trips
}

/// Factorized operator for a nodal potential.
pub fn assemble_operator(q: &PotentialField) -> Result<SparseSystem> {
    let grid = q.grid();
    SparseSystem::factorize(grid.n_interior(), &operator_triplets(grid, q.values()))
}

fn interior_to_full(grid: Grid2D, v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::zeros(grid.n_nodes());
    for (k, l) in grid.interior_nodes() {
        out[grid.node_index(k, l)] = v[grid.interior_index(k, l)];
    }
    out
}

/// Well functions as interior right-hand-side columns.
pub(crate) fn well_rhs(grid: Grid2D, wells: &WellFields) -> DMatrix<Complex64> {
    DMatrix::from_fn(grid.n_interior(), wells.count(), |row, j| {
        let (k, l) = interior_kl(grid, row);
        Complex64::new(wells.field(j)[grid.node_index(k, l)], 0.0)
    })
}

pub(crate) fn interior_kl(grid: Grid2D, interior_index: usize) -> (usize, usize) {
    let m = grid.n_cells() - 1;
    (interior_index % m + 1, interior_index / m + 1)
}

/// Trapezoid-weighted well values on interior nodes, column per well.
pub(crate) fn weighted_wells(grid: Grid2D, wells: &WellFields) -> DMatrix<f64> {
    DMatrix::from_fn(grid.n_interior(), wells.count(), |row, j| {
        let (k, l) = interior_kl(grid, row);
        grid.quad_weight(k, l) * wells.field(j)[grid.node_index(k, l)]
    })
}

/// `D_ij = <phi_j, u_i>` from interior field columns.
pub(crate) fn measure(weighted: &DMatrix<f64>, fields: &DMatrix<Complex64>) -> Data {
    let n = weighted.ncols();
    Data::from_fn(n, n, |i, j| {
        let mut acc = Complex64::default();
        for y in 0..weighted.nrows() {
            acc += weighted[(y, j)] * fields[(y, i)];
        }
        acc
    })
}

/// Solves one well problem per source and returns the measurement matrix.
pub fn forward_map(q: &PotentialField, wells: &WellFields) -> Result<Data> {
    let grid = q.grid();
    assert_eq!(grid.n_cells(), wells.grid().n_cells(), "wells and potential share a grid");
    let system = assemble_operator(q)?;
    let fields = system.solve_many(&well_rhs(grid, wells))?;
    Ok(measure(&weighted_wells(grid, wells), &fields))
}

/// Spreads region-supported parameter values onto the full node set.
pub fn scatter_region(grid: Grid2D, region: &NodeRegion, x: &Param) -> DVector<Complex64> {
    let mut out = DVector::zeros(grid.n_nodes());
    for (k, l) in region.nodes() {
        out[grid.node_index(k, l)] = x[region.local_index(k, l)];
    }
    out
}

/// Forward model expanded about a reference potential plus a
/// region-supported perturbation.
pub struct SchrodingerModel {
    grid: Grid2D,
    region: NodeRegion,
    wells: Arc<WellFields>,
    q_base: Arc<DVector<Complex64>>,
    x_ref: Param,
    system: SparseSystem,
    fields: DMatrix<Complex64>,
    weighted: DMatrix<f64>,
    f_ref: Data,
    solves: Arc<AtomicUsize>,
}

impl SchrodingerModel {
    /// Expands about `q0`; the unknown is the potential difference on the
    /// margin region at distance `eps` from the boundary.
    pub fn new(q0: &PotentialField, wells: Arc<WellFields>, eps: f64) -> Result<Self> {
        let grid = q0.grid();
        assert_eq!(grid.n_cells(), wells.grid().n_cells(), "wells and potential share a grid");
        let region = grid.margin_region(eps);
        let x0 = Param::zeros(region.node_count());
        Self::with_expansion(
            grid,
            region,
            wells,
            Arc::new(q0.values().clone()),
            x0,
            Arc::new(AtomicUsize::new(0)),
        )
    }

    fn with_expansion(
        grid: Grid2D,
        region: NodeRegion,
        wells: Arc<WellFields>,
        q_base: Arc<DVector<Complex64>>,
        x_ref: Param,
        solves: Arc<AtomicUsize>,
    ) -> Result<Self> {
        let q = q_base.as_ref() + scatter_region(grid, &region, &x_ref);
        let system = SparseSystem::factorize(grid.n_interior(), &operator_triplets(grid, &q))?;
        let fields = system.solve_many(&well_rhs(grid, &wells))?;
        solves.fetch_add(wells.count(), Ordering::Relaxed);
        let weighted = weighted_wells(grid, &wells);
        let f_ref = measure(&weighted, &fields);
        Ok(Self { grid, region, wells, q_base, x_ref, system, fields, weighted, f_ref, solves })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn region(&self) -> &NodeRegion {
        &self.region
    }

    pub fn wells(&self) -> &WellFields {
        &self.wells
    }

    /// Field of source `i` at the expansion point, on all nodes.
    pub fn field(&self, i: usize) -> DVector<Complex64> {
        interior_to_full(self.grid, &self.fields.column(i).clone_owned())
    }

    /// Potential at the expansion point, on all nodes.
    pub fn potential(&self) -> PotentialField {
        let q = self.q_base.as_ref() + scatter_region(self.grid, &self.region, &self.x_ref);
        PotentialField::from_values(self.grid, q)
    }

    fn region_interior_rows(&self) -> Vec<usize> {
        self.region
            .nodes()
            .map(|(k, l)| self.grid.interior_index(k, l))
            .collect()
    }

    /// Linearization rows `-w_y u_i(y) u_j(y)` over region nodes `y`; row
    /// order matches the flattened measurement layout.
    pub fn assemble_jacobian(&self) -> DMatrix<Complex64> {
        let n = self.wells.count();
        let rows = self.region_interior_rows();
        let weights: Vec<f64> = self
            .region
            .nodes()
            .map(|(k, l)| self.grid.quad_weight(k, l))
            .collect();
        DMatrix::from_fn(n * n, rows.len(), |r, c| {
            let (i, j) = (r / n, r % n);
            let y = rows[c];
            -weights[c] * self.fields[(y, i)] * self.fields[(y, j)]
        })
    }
}

impl ForwardModel for SchrodingerModel {
    fn param_dim(&self) -> usize {
        self.region.node_count()
    }

    fn data_size(&self) -> usize {
        self.wells.count()
    }

    fn expansion_point(&self) -> &Param {
        &self.x_ref
    }

    fn data_at_expansion(&self) -> &Data {
        &self.f_ref
    }

    fn evaluate(&self, x: &Param) -> Result<Data> {
        let q = self.q_base.as_ref() + scatter_region(self.grid, &self.region, x);
        let system = SparseSystem::factorize(self.grid.n_interior(), &operator_triplets(self.grid, &q))?;
        let fields = system.solve_many(&well_rhs(self.grid, &self.wells))?;
        self.solves.fetch_add(self.wells.count(), Ordering::Relaxed);
        Ok(measure(&self.weighted, &fields))
    }

    fn apply_a(&self, args: &[&Param]) -> Result<Data> {
        let n = args.len();
        if n == 0 {
            return Err(Error::Shape("expansion coefficient needs at least one argument".into()));
        }
        for a in args {
            if a.len() != self.region.node_count() {
                return Err(Error::Shape(format!(
                    "perturbation has {} entries, region has {}",
                    a.len(),
                    self.region.node_count()
                )));
            }
        }
        let rows = self.region_interior_rows();
        let mut t = self.fields.clone();
        // Innermost slot acts first: with S the solve operator, the chain is
        // S eta_1 S eta_2 ... S eta_n S phi_i, alternating sign per order.
        for arg in args.iter().rev() {
            let mut rhs = DMatrix::zeros(t.nrows(), t.ncols());
            for (c, &y) in rows.iter().enumerate() {
                let v = arg[c];
                for i in 0..t.ncols() {
                    rhs[(y, i)] = v * t[(y, i)];
                }
            }
            t = self.system.solve_many(&rhs)?;
        }
        self.solves.fetch_add(n * self.wells.count(), Ordering::Relaxed);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(measure(&self.weighted, &t) * Complex64::new(sign, 0.0))
    }

    fn reexpand(&self, x: &Param) -> Result<Self> {
        Self::with_expansion(
            self.grid,
            self.region.clone(),
            Arc::clone(&self.wells),
            Arc::clone(&self.q_base),
            x.clone(),
            Arc::clone(&self.solves),
        )
    }

    fn build_b1(&self, tau: f64) -> Result<LinearInverse> {
        LinearInverse::from_jacobian(&self.assemble_jacobian(), tau)
    }

    fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}
