//! The forward-model contract consumed by the series machinery.
//!
//! A model is a map `f` from parameters to an `N x N` measurement matrix,
//! carried together with its multilinear expansion about a base point:
//!
//! ```text
//! f(x_ref + h) - f(x_ref) = sum_{n >= 1} a_n(h, ..., h)
//! ```
//!
//! The engine never looks inside a model; it only evaluates `f`, applies the
//! coefficients `a_n` to explicit argument tuples, re-expands about a new
//! point, and asks for a regularized inverse of `a_1`. Parameters live in a
//! finite-dimensional complex space with the max-modulus norm, measurements
//! in the space of complex `N x N` matrices with the max-modulus norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;
use crate::numerics::TruncatedSvd;

/// Parameter vectors (model coordinates, complex).
pub type Param = DVector<Complex64>;

/// Measurement matrices (`N x N`, complex).
pub type Data = DMatrix<Complex64>;

/// Max-modulus norm on parameters.
pub fn param_norm(x: &Param) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-modulus norm on measurement matrices.
pub fn data_norm(d: &Data) -> f64 {
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Flattens a measurement matrix row by row: entry `(i, j)` lands at `i*N + j`.
pub fn vec_data(d: &Data) -> DVector<Complex64> {
    let (n, m) = (d.nrows(), d.ncols());
    DVector::from_fn(n * m, |idx, _| d[(idx / m, idx % m)])
}

/// Number of power-iteration steps used for operator-norm estimates.
const NORM_ITERATIONS: usize = 50;

/// A regularized left inverse of the linearized forward map.
///
/// Acts on flattened measurement matrices. Built from a truncated SVD of the
/// Jacobian; carries a spectral-norm estimate obtained by power iteration on
/// `b1^H b1` from a fixed start vector, so the estimate is deterministic.
pub struct LinearInverse {
    pinv: DMatrix<Complex64>,
    norm: f64,
}

impl LinearInverse {
    /// Wraps an explicit pseudoinverse matrix (`param_dim x N^2`).
    pub fn from_pinv(pinv: DMatrix<Complex64>) -> Self {
        let norm = spectral_norm_estimate(&pinv);
        Self { pinv, norm }
    }

    /// Builds the truncated-SVD pseudoinverse of a Jacobian (`N^2 x param_dim`).
    pub fn from_jacobian(jacobian: &DMatrix<Complex64>, tau: f64) -> Result<Self> {
        let svd = TruncatedSvd::new(jacobian, tau)?;
        Ok(Self::from_pinv(svd.pinv_matrix()))
    }

    /// Applies the inverse to a measurement matrix.
    pub fn apply(&self, d: &Data) -> Param {
        &self.pinv * vec_data(d)
    }

    /// Spectral-norm estimate of the inverse.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn param_dim(&self) -> usize {
        self.pinv.nrows()
    }

    pub fn data_len(&self) -> usize {
        self.pinv.ncols()
    }
}

fn spectral_norm_estimate(m: &DMatrix<Complex64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut lambda = 0.0;
    for _ in 0..NORM_ITERATIONS {
        let w = m.adjoint() * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / Complex64::new(norm, 0.0);
    }
    lambda.sqrt()
}

/// A forward map expanded about a base point.
///
/// Implementations must be deterministic: the same calls in the same order
/// produce identical floating-point results.
pub trait ForwardModel: Sized + Sync {
    /// Dimension of the parameter space.
    fn param_dim(&self) -> usize;

    /// Side length `N` of the measurement matrix.
    fn data_size(&self) -> usize;

    /// The expansion point `x_ref`.
    fn expansion_point(&self) -> &Param;

    /// `f(x_ref)`, cached by the model.
    fn data_at_expansion(&self) -> &Data;

    /// Evaluates the full forward map at an arbitrary parameter.
    fn evaluate(&self, x: &Param) -> Result<Data>;

    /// Applies the degree-`n` expansion coefficient to an argument tuple,
    /// `n = args.len() >= 1`.
    fn apply_a(&self, args: &[&Param]) -> Result<Data>;

    /// Re-expands the same forward map about a new base point.
    fn reexpand(&self, x: &Param) -> Result<Self>;

    /// Regularized inverse of `a_1` with relative SVD threshold `tau`.
    fn build_b1(&self, tau: f64) -> Result<LinearInverse>;

    /// Cumulative count of forward-problem solves across this model and
    /// everything re-expanded from it. Models without an inner solve count
    /// forward evaluations instead.
    fn solve_count(&self) -> usize;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_data_is_row_major() {
        let d = Data::from_fn(2, 2, |i, j| Complex64::new((10 * i + j) as f64, 0.0));
        let v = vec_data(&d);
        let got: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn norm_estimate_matches_known_spectrum() {
        // Diagonal matrix: spectral norm is the largest modulus.
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(0.0, 2.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(2, 2)] = Complex64::new(-0.1, 0.1);
        let est = spectral_norm_estimate(&m);
        assert!((est - 2.0).abs() < 1e-10, "estimate {est}");
    }

    #[test]
    fn max_norms() {
        let x = Param::from_column_slice(&[Complex64::new(3.0, 4.0), Complex64::new(1.0, 0.0)]);
        assert!((param_norm(&x) - 5.0).abs() < 1e-15);
        let d = Data::from_fn(2, 2, |i, j| Complex64::new(i as f64, j as f64));
        assert!((data_norm(&d) - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
