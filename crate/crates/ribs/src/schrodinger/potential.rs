//! Nodal potential fields.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::Result;
use crate::numerics::{restrict_fine_to_coarse, Grid2D};

/// Complex potential sampled at every grid node.
#[derive(Clone)]
pub struct PotentialField {
    grid: Grid2D,
    values: DVector<Complex64>,
}

impl PotentialField {
    pub fn zero(grid: Grid2D) -> Self {
        Self { grid, values: DVector::zeros(grid.n_nodes()) }
    }

    pub fn from_values(grid: Grid2D, values: DVector<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes(), "potential length");
        Self { grid, values }
    }

    /// Samples a real-valued function of `(x, y)` at the nodes.
    pub fn from_real_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = DVector::from_fn(grid.n_nodes(), |idx, _| {
            let (k, l) = grid.node_kl(idx);
            let (x, y) = grid.node_coords(k, l);
            Complex64::new(f(x, y), 0.0)
        });
        Self { grid, values }
    }

    /// Samples a complex-valued function of `(x, y)` at the nodes.
    pub fn from_complex_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = DVector::from_fn(grid.n_nodes(), |idx, _| {
            let (k, l) = grid.node_kl(idx);
            let (x, y) = grid.node_coords(k, l);
            f(x, y)
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Injects the field onto a coarser grid with coincident nodes.
    pub fn restrict_to(&self, coarse: Grid2D) -> Result<Self> {
        let values = restrict_fine_to_coarse(self.grid, coarse, &self.values)?;
        Ok(Self { grid: coarse, values })
    }

    /// Real parts as an `f64` vector, e.g. for CSV or image output.
    pub fn real_values(&self) -> DVector<f64> {
        self.values.map(|z| z.re)
    }

    pub fn imag_values(&self) -> DVector<f64> {
        self.values.map(|z| z.im)
    }
}
