//! Truncated singular value decomposition and the regularized pseudoinverse.
//!
//! Linearized measurement operators here are ill-conditioned: their singular
//! values decay fast and the small ones amplify noise when inverted. The
//! standard cure is spectral cutoff, dropping every singular value below a
//! relative threshold `tau * sigma_max` before forming `V S^-1 U^H`.

use faer::linalg::solvers::Svd;
use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Thin SVD of a dense complex matrix, truncated at a relative threshold.
pub struct TruncatedSvd {
    u: DMatrix<Complex64>,
    sigma: Vec<f64>,
    v: DMatrix<Complex64>,
    sigma_max: f64,
    tau: f64,
}

impl TruncatedSvd {
    /// Factors `a`, keeping singular triplets with `sigma >= tau * sigma_max`.
    ///
    /// Returns [`Error::EmptySpectrum`] when nothing survives, which for a
    /// relative threshold `tau <= 1` only happens for the zero matrix.
    pub fn new(a: &DMatrix<Complex64>, tau: f64) -> Result<Self> {
        assert!((0.0..=1.0).contains(&tau), "threshold must lie in [0, 1]");
        let (m, n) = (a.nrows(), a.ncols());
        let fa = Mat::<Complex64>::from_fn(m, n, |i, j| a[(i, j)]);
        let svd = Svd::new_thin(fa.as_ref()).map_err(|_| Error::EmptySpectrum)?;
        let s = svd.S();
        let r_full = s.dim();

        let sigma_max = if r_full > 0 { s[0].re } else { 0.0 };
        let mut rank = 0;
        while rank < r_full && s[rank].re >= tau * sigma_max && s[rank].re > 0.0 {
            rank += 1;
        }
        if rank == 0 {
            return Err(Error::EmptySpectrum);
        }

        let fu = svd.U();
        let fv = svd.V();
        Ok(Self {
            u: DMatrix::from_fn(m, rank, |i, j| fu[(i, j)]),
            sigma: (0..rank).map(|i| s[i].re).collect(),
            v: DMatrix::from_fn(n, rank, |i, j| fv[(i, j)]),
            sigma_max,
            tau,
        })
    }

    /// Number of retained singular triplets.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Retained singular values, nonincreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Retained right singular vector `k`.
    pub fn right_vector(&self, k: usize) -> DVector<Complex64> {
        self.v.column(k).clone_owned()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Applies the truncated pseudoinverse: `V S^-1 U^H y`.
    pub fn pinv_apply(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        let uy = self.u.adjoint() * y;
        let scaled = DVector::from_fn(self.rank(), |i, _| uy[i] / self.sigma[i]);
        &self.v * scaled
    }

    /// Materializes the truncated pseudoinverse as an `n x m` matrix.
    pub fn pinv_matrix(&self) -> DMatrix<Complex64> {
        let mut vs = self.v.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            let mut col = vs.column_mut(j);
            col /= Complex64::new(*s, 0.0);
        }
        vs * self.u.adjoint()
    }
}
