//! Dense polynomial forward models.
//!
//! A polynomial map `f(x) = f_0 + sum_k A_k(x, ..., x)` with explicit
//! multilinear coefficient tensors is the one setting where everything the
//! engine does can be checked exactly: the expansion about any point is again
//! a finite polynomial, obtained by fixing subsets of tensor slots at the
//! shift. These models drive the unit and acceptance tests and the CLI
//! self-check; the scalar special case reproduces classical power-series
//! reversion.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{Data, ForwardModel, LinearInverse, Param};
use crate::error::{Error, Result};

/// Polynomial forward map with dense multilinear coefficients.
///
/// Coefficient `k` (degree `k`) is stored as an `N^2 x p^k` matrix acting on
/// the Kronecker product of the `k` arguments; column index encodes the slot
/// multi-index `(i_1, ..., i_k)` with slot 1 most significant.
pub struct PolynomialModel {
    data_side: usize,
    param_dim: usize,
    coeffs: Vec<DMatrix<Complex64>>,
    x_ref: Param,
    f_ref: Data,
    evaluations: Arc<AtomicUsize>,
}

impl PolynomialModel {
    /// Builds a model about the origin from degree-ordered coefficients
    /// (`coeffs[0]` is the linear term). `f(0) = f_origin`.
    pub fn new(data_side: usize, param_dim: usize, coeffs: Vec<DMatrix<Complex64>>, f_origin: Data) -> Self {
        for (k, c) in coeffs.iter().enumerate() {
            assert_eq!(c.nrows(), data_side * data_side, "coefficient {} row count", k + 1);
            assert_eq!(c.ncols(), param_dim.pow((k + 1) as u32), "coefficient {} column count", k + 1);
        }
        assert_eq!(f_origin.nrows(), data_side);
        assert_eq!(f_origin.ncols(), data_side);
        Self {
            data_side,
            param_dim,
            coeffs,
            x_ref: Param::zeros(param_dim),
            f_ref: f_origin,
            evaluations: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Scalar map `f(h) = a_1 h + a_2 h^2 + ...` as a 1x1-measurement model.
    pub fn scalar(series: &[Complex64]) -> Self {
        let coeffs = series
            .iter()
            .map(|&a| DMatrix::from_element(1, 1, a))
            .collect();
        Self::new(1, 1, coeffs, Data::zeros(1, 1))
    }

    /// Random polynomial with a well-conditioned linear part: `a_1` is the
    /// identity plus a perturbation, higher coefficients decay with degree.
    pub fn random(data_side: usize, param_dim: usize, degree: usize, seed: u64) -> Self {
        assert_eq!(data_side * data_side, param_dim, "random model wants a square linear part");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_c = |scale: f64| -> Complex64 {
            Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
        };
        let mut coeffs = Vec::with_capacity(degree);
        for k in 1..=degree {
            let cols = param_dim.pow(k as u32);
            let scale = 0.4 / k as f64;
            let mut c = DMatrix::from_fn(param_dim, cols, |_, _| rand_c(scale));
            if k == 1 {
                for i in 0..param_dim {
                    c[(i, i)] += Complex64::new(1.0, 0.0);
                }
            }
            coeffs.push(c);
        }
        Self::new(data_side, param_dim, coeffs, Data::zeros(data_side, data_side))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    fn kron(&self, args: &[&Param]) -> DVector<Complex64> {
        let p = self.param_dim;
        let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
        for arg in args {
            let mut next = DVector::zeros(v.len() * p);
            for i in 0..v.len() {
                for j in 0..p {
                    next[i * p + j] = v[i] * arg[j];
                }
            }
            v = next;
        }
        v
    }

    fn unflatten(&self, v: DVector<Complex64>) -> Data {
        let n = self.data_side;
        Data::from_fn(n, n, |i, j| v[i * n + j])
    }

    /// Degree-`k` coefficient with `shift` substituted into every slot
    /// outside a free subset of size `j`, summed over all such subsets:
    /// the degree-`j` coefficient of the expansion about `x_ref + shift`.
    fn reexpanded_coeff(&self, j: usize, shift: &Param) -> DMatrix<Complex64> {
        let p = self.param_dim;
        let n2 = self.data_side * self.data_side;
        let mut out = DMatrix::zeros(n2, p.pow(j as u32));
        for (km1, c) in self.coeffs.iter().enumerate() {
            let k = km1 + 1;
            if k < j {
                continue;
            }
            for subset in subsets_of_size(k, j) {
                // One pass over all p^k columns of the degree-k tensor,
                // splitting each multi-index into free and fixed slots.
                let cols = p.pow(k as u32);
                for col in 0..cols {
                    let mut free_index = 0usize;
                    let mut weight = Complex64::new(1.0, 0.0);
                    let mut rem = col;
                    let mut digits = vec![0usize; k];
                    for slot in (0..k).rev() {
                        digits[slot] = rem % p;
                        rem /= p;
                    }
                    for slot in 0..k {
                        if subset & (1 << slot) != 0 {
                            free_index = free_index * p + digits[slot];
                        } else {
                            weight *= shift[digits[slot]];
                        }
                    }
                    if weight.norm() == 0.0 {
                        continue;
                    }
                    for r in 0..n2 {
                        out[(r, free_index)] += weight * c[(r, col)];
                    }
                }
            }
        }
        out
    }
}

/// Bitmasks over `k` slots with exactly `j` bits set, ascending.
fn subsets_of_size(k: usize, j: usize) -> Vec<usize> {
    (0usize..(1 << k)).filter(|m| m.count_ones() as usize == j).collect()
}

impl ForwardModel for PolynomialModel {
    fn param_dim(&self) -> usize {
        self.param_dim
    }

    fn data_size(&self) -> usize {
        self.data_side
    }

    fn expansion_point(&self) -> &Param {
        &self.x_ref
    }

    fn data_at_expansion(&self) -> &Data {
        &self.f_ref
    }

    fn evaluate(&self, x: &Param) -> Result<Data> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let h = x - &self.x_ref;
        let mut out = self.f_ref.clone();
        for (km1, c) in self.coeffs.iter().enumerate() {
            let args: Vec<&Param> = std::iter::repeat(&h).take(km1 + 1).collect();
            out += self.unflatten(c * self.kron(&args));
        }
        Ok(out)
    }

    fn apply_a(&self, args: &[&Param]) -> Result<Data> {
        let n = args.len();
        if n == 0 {
            return Err(Error::Shape("apply_a needs at least one argument".into()));
        }
        for a in args {
            if a.len() != self.param_dim {
                return Err(Error::Shape(format!(
                    "argument has dimension {}, model has {}",
                    a.len(),
                    self.param_dim
                )));
            }
        }
        if n > self.coeffs.len() {
            return Ok(Data::zeros(self.data_side, self.data_side));
        }
        Ok(self.unflatten(&self.coeffs[n - 1] * self.kron(args)))
    }

    fn reexpand(&self, x: &Param) -> Result<Self> {
        let shift = x - &self.x_ref;
        let coeffs: Vec<DMatrix<Complex64>> =
            (1..=self.coeffs.len()).map(|j| self.reexpanded_coeff(j, &shift)).collect();
        let f_ref = self.evaluate(x)?;
        Ok(Self {
            data_side: self.data_side,
            param_dim: self.param_dim,
            coeffs,
            x_ref: x.clone(),
            f_ref,
            evaluations: Arc::clone(&self.evaluations),
        })
    }

    fn build_b1(&self, tau: f64) -> Result<LinearInverse> {
        // The degree-1 coefficient already acts on flattened measurements.
        LinearInverse::from_jacobian(&self.coeffs[0].clone_owned(), tau)
    }

    fn solve_count(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}
