//! Source and receiver wells.
//!
//! A well is a smooth bump of unit height supported in a small disk. The
//! same functions act as sources of the fields and as weights of the
//! measurements.

use nalgebra::DVector;

use crate::numerics::Grid2D;

/// Radius of the standard well disks.
pub const WELL_RADIUS: f64 = 0.05;

/// Disk-supported smooth bump: `exp(1 - 1/(1 - (r/rho)^2))` inside the
/// disk, zero outside, maximum exactly 1 at the center.
pub fn bump(r: f64, rho: f64) -> f64 {
    let s = r / rho;
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Centers and common radius of a family of wells.
#[derive(Clone, Debug)]
pub struct WellSet {
    pub centers: Vec<(f64, f64)>,
    pub radius: f64,
}

impl WellSet {
    /// Sixteen wells on the interior lattice `(0.2 m, 0.2 n)`, `m, n = 1..4`.
    pub fn standard() -> Self {
        let mut centers = Vec::with_capacity(16);
        for m in 1..=4 {
            for n in 1..=4 {
                centers.push((0.2 * m as f64, 0.2 * n as f64));
            }
        }
        Self { centers, radius: WELL_RADIUS }
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Well profile `i` at a point.
    pub fn profile(&self, i: usize, x: f64, y: f64) -> f64 {
        let (cx, cy) = self.centers[i];
        bump(((x - cx).powi(2) + (y - cy).powi(2)).sqrt(), self.radius)
    }

    /// Evaluates every profile at the grid nodes.
    pub fn rasterize(&self, grid: Grid2D) -> WellFields {
        let nodes = grid.nodes_per_side();
        let fields: Vec<DVector<f64>> = (0..self.count())
            .map(|i| {
                DVector::from_fn(nodes * nodes, |idx, _| {
                    let (k, l) = grid.node_kl(idx);
                    let (x, y) = grid.node_coords(k, l);
                    self.profile(i, x, y)
                })
            })
            .collect();
        WellFields::from_nodal(grid, fields)
    }
}

/// Nodal well functions on one grid, with the union of their supports.
pub struct WellFields {
    grid: Grid2D,
    fields: Vec<DVector<f64>>,
    support: Vec<bool>,
}

impl WellFields {
    /// Wraps explicit nodal fields, e.g. profiles divided by a known
    /// conductivity.
    pub fn from_nodal(grid: Grid2D, fields: Vec<DVector<f64>>) -> Self {
        let n_nodes = grid.n_nodes();
        for f in &fields {
            assert_eq!(f.len(), n_nodes, "well field length");
        }
        let mut support = vec![false; n_nodes];
        for f in &fields {
            for (idx, v) in f.iter().enumerate() {
                if *v != 0.0 {
                    support[idx] = true;
                }
            }
        }
        Self { grid, fields, support }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn count(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, i: usize) -> &DVector<f64> {
        &self.fields[i]
    }

    /// True at nodes where any well function is nonzero.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    /// Rescales every field pointwise by `1 / scale(x)`.
    pub fn scaled_by_inverse(&self, scale: &DVector<f64>) -> Self {
        assert_eq!(scale.len(), self.grid.n_nodes());
        let fields = self
            .fields
            .iter()
            .map(|f| DVector::from_fn(f.len(), |idx, _| f[idx] / scale[idx]))
            .collect();
        Self::from_nodal(self.grid, fields)
    }
}
