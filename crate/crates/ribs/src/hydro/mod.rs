//! Transient hydraulic tomography in the frequency domain.
//!
//! The aquifer is described by a hydraulic conductivity `sigma > 0` and a
//! storage coefficient `S`, both nodal fields on the unit square. Injecting
//! through a well and integrating the resulting head against the well
//! profiles produces one complex measurement matrix per angular frequency.
//! Substituting `v = sigma^{1/2} u` turns the head equation into a
//! Schrodinger problem with the complex potential
//!
//! ```text
//! Q = lap(sigma^{1/2}) / sigma^{1/2} + i omega S / sigma
//! ```
//!
//! and well functions divided by `sigma^{1/2}`, so the whole inversion stack
//! for the Schrodinger problem applies unchanged. Recovery runs in the other
//! direction: invert for `Q` at two frequencies, split the result into the
//! frequency-independent part `r1` and the slope `r2`, solve a Dirichlet
//! problem for `sigma^{1/2}` from `r1`, and read `S = sigma * r2` off
//! pointwise.

pub mod forward;
pub mod pipeline;
pub mod recover;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Grid2D;
use crate::schrodinger::PotentialField;

pub use forward::{hydro_forward, liouville_potential};
pub use pipeline::{
    noise_tau, reconstruct_q, two_freq_pipeline, ReconMethod, TwoFreqConfig, TwoFreqResult,
};
pub use recover::{
    one_freq_recover, recover_sigma, recover_storage, two_freq_split, FieldSplit, OneFreqRecovery,
    SigmaRecovery,
};

/// Conductivity and storage fields of one aquifer, nodal on one grid.
///
/// The constructor enforces `sigma > 0` everywhere; boundary values of
/// `sigma` are treated as known data by the recovery solvers.
#[derive(Clone, Debug)]
pub struct AquiferParams {
    grid: Grid2D,
    sigma: DVector<f64>,
    storage: DVector<f64>,
}

impl AquiferParams {
    pub fn new(grid: Grid2D, sigma: DVector<f64>, storage: DVector<f64>) -> Result<Self> {
        if sigma.len() != grid.n_nodes() {
            return Err(Error::GridMismatch { expected: grid.n_nodes(), got: sigma.len() });
        }
        if storage.len() != grid.n_nodes() {
            return Err(Error::GridMismatch { expected: grid.n_nodes(), got: storage.len() });
        }
        let min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::NonPositiveSigma(min));
        }
        Ok(Self { grid, sigma, storage })
    }

    /// The homogeneous reference aquifer: `sigma = 1`, `S = 0`.
    pub fn uniform(grid: Grid2D) -> Self {
        Self {
            grid,
            sigma: DVector::from_element(grid.n_nodes(), 1.0),
            storage: DVector::zeros(grid.n_nodes()),
        }
    }

    pub fn from_fns(
        grid: Grid2D,
        sigma: impl Fn(f64, f64) -> f64,
        storage: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let eval = |f: &dyn Fn(f64, f64) -> f64| {
            DVector::from_fn(grid.n_nodes(), |idx, _| {
                let (k, l) = grid.node_kl(idx);
                let (x, y) = grid.node_coords(k, l);
                f(x, y)
            })
        };
        Self::new(grid, eval(&sigma), eval(&storage))
    }

    /// Random smooth fields from a low-order sine expansion with seeded
    /// coefficients, scaled to contrasts `|1 - sigma| <= 0.3` and
    /// `|S| <= 1.5`.
    pub fn random_smooth(grid: Grid2D, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = [[0.0f64; 4]; 2];
        for field in &mut coeffs {
            for c in field.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
        }
        let modes = |c: &[f64; 4], x: f64, y: f64| {
            let pi = std::f64::consts::PI;
            0.25 * (c[0] * (pi * x).sin() * (pi * y).sin()
                + c[1] * (pi * x).sin() * (2.0 * pi * y).sin()
                + c[2] * (2.0 * pi * x).sin() * (pi * y).sin()
                + c[3] * (2.0 * pi * x).sin() * (2.0 * pi * y).sin())
        };
        Self::from_fns(
            grid,
            |x, y| 1.0 + 0.3 * modes(&coeffs[0], x, y),
            |x, y| 1.5 * modes(&coeffs[1], x, y),
        )
        .expect("contrast 0.3 keeps sigma positive")
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn storage(&self) -> &DVector<f64> {
        &self.storage
    }

    pub fn sqrt_sigma(&self) -> DVector<f64> {
        self.sigma.map(f64::sqrt)
    }

    /// Pointwise restriction to a coarser grid with a divisor cell count.
    pub fn restrict_to(&self, coarse: Grid2D) -> Result<Self> {
        if self.grid.n_cells() % coarse.n_cells() != 0 {
            return Err(Error::IncompatibleGrids {
                fine: self.grid.n_cells(),
                coarse: coarse.n_cells(),
            });
        }
        let ratio = self.grid.n_cells() / coarse.n_cells();
        let pick = |v: &DVector<f64>| {
            DVector::from_fn(coarse.n_nodes(), |idx, _| {
                let (k, l) = coarse.node_kl(idx);
                v[self.grid.node_index(k * ratio, l * ratio)]
            })
        };
        Ok(Self { grid: coarse, sigma: pick(&self.sigma), storage: pick(&self.storage) })
    }
}

/// One measurement matrix at one angular frequency.
#[derive(Clone, Debug)]
pub struct FreqMeasurement {
    pub omega: f64,
    pub mhat: nalgebra::DMatrix<num_complex::Complex64>,
}

/// A Schrodinger potential tagged with the frequency it was built or
/// reconstructed at. Boundary entries of the field are zero; the Dirichlet
/// operator never reads them.
pub struct ComplexPotential {
    pub omega: f64,
    pub field: PotentialField,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_rejects_nonpositive_conductivity() {
        let grid = Grid2D::new(8);
        let mut sigma = DVector::from_element(grid.n_nodes(), 1.0);
        sigma[40] = -0.25;
        let storage = DVector::zeros(grid.n_nodes());
        match AquiferParams::new(grid, sigma, storage) {
            Err(Error::NonPositiveSigma(v)) => assert_eq!(v, -0.25),
            other => panic!("expected NonPositiveSigma, got {other:?}"),
        }
    }

    #[test]
    fn constructor_rejects_wrong_lengths() {
        let grid = Grid2D::new(8);
        let sigma = DVector::from_element(10, 1.0);
        let storage = DVector::zeros(grid.n_nodes());
        assert!(matches!(
            AquiferParams::new(grid, sigma, storage),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn random_fields_stay_within_the_stated_contrasts() {
        for seed in 0..6 {
            let params = AquiferParams::random_smooth(Grid2D::new(30), seed);
            for v in params.sigma().iter() {
                assert!((1.0 - v).abs() <= 0.3 + 1e-12);
            }
            for v in params.storage().iter() {
                assert!(v.abs() <= 1.5 + 1e-12);
            }
        }
        let a = AquiferParams::random_smooth(Grid2D::new(30), 3);
        let b = AquiferParams::random_smooth(Grid2D::new(30), 3);
        assert_eq!(a.sigma(), b.sigma());
        assert_eq!(a.storage(), b.storage());
    }

    #[test]
    fn restriction_subsamples_coincident_nodes() {
        let fine = Grid2D::new(8);
        let params = AquiferParams::from_fns(fine, |x, y| 1.0 + x * y, |x, y| x - y).unwrap();
        let coarse = Grid2D::new(4);
        let r = params.restrict_to(coarse).unwrap();
        for l in 0..=4 {
            for k in 0..=4 {
                let (x, y) = coarse.node_coords(k, l);
                let i = coarse.node_index(k, l);
                assert!((r.sigma()[i] - (1.0 + x * y)).abs() < 1e-15);
                assert!((r.storage()[i] - (x - y)).abs() < 1e-15);
            }
        }
        assert!(matches!(
            params.restrict_to(Grid2D::new(3)),
            Err(Error::IncompatibleGrids { fine: 8, coarse: 3 })
        ));
    }
}
