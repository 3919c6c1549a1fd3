//! Dense diagonal-perturbation model and the three-method comparison run.
//!
//! The forward map is `f(x) = M^T (L - diag(x))^{-1} M` with a fixed
//! tridiagonal `L` and a tall random `M`. When `||L^{-1} diag(x)|| < 1` the
//! resolvent expands in a geometric series, so every expansion coefficient
//! is available in closed form:
//!
//! ```text
//! a_n(eta_1, ..., eta_n) = M^T L0^{-1} diag(eta_1) ... L0^{-1} diag(eta_n) L0^{-1} M
//! ```
//!
//! about the shifted background `L0 = L - diag(x_ref)`. At 256 unknowns and
//! 8 sources everything is dense and instant, which makes this the place to
//! watch the summed series converge linearly while the order-1 and order-2
//! restarts converge quadratically and faster.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{
    chebyshev_halley_run, gauss_newton_run, inverse_series_sum, Data, ForwardModel,
    IterationTrace, LinearInverse, Param,
};
use crate::error::{Error, Result};
use crate::numerics::{fmt_float, RESIDUAL_TOL};

/// Parameter count of the standard instance.
pub const TOY_DIM: usize = 256;
/// Source count of the standard instance.
pub const TOY_SOURCES: usize = 8;
/// Standard deviation of the true parameter entries.
pub const TOY_TRUE_STD: f64 = 0.1;

/// Dense forward model `x -> M^T (L - diag(x))^{-1} M`.
pub struct ToyModel {
    l: Arc<DMatrix<Complex64>>,
    m: Arc<DMatrix<Complex64>>,
    x_true: Arc<Param>,
    x_ref: Param,
    /// `L - diag(x_ref)` and its factorization.
    shifted: DMatrix<Complex64>,
    lu: nalgebra::linalg::LU<Complex64, Dyn, Dyn>,
    f_ref: Data,
    solves: Arc<AtomicUsize>,
}

fn tridiagonal(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(-3.0, 0.0)
        } else if i.abs_diff(j) == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    })
}

fn diag_of(x: &Param) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_iterator(x.len(), x.iter().copied()))
}

impl ToyModel {
    /// The shipped instance: `L` tridiagonal with diagonal `-3` and
    /// off-diagonals `1`, `M` with independent standard normal entries drawn
    /// column by column, then the true parameter with standard deviation
    /// [`TOY_TRUE_STD`], all from one seeded stream.
    pub fn standard(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |scale: f64| {
            let v: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(scale * v, 0.0)
        };
        let m_entries: Vec<Complex64> = (0..TOY_DIM * TOY_SOURCES).map(|_| draw(1.0)).collect();
        let m = DMatrix::from_vec(TOY_DIM, TOY_SOURCES, m_entries);
        let x_true = Param::from_iterator(TOY_DIM, (0..TOY_DIM).map(|_| draw(TOY_TRUE_STD)));
        Self::from_parts(tridiagonal(TOY_DIM), m, x_true)
    }

    /// Builds a model from explicit matrices, expanded about zero.
    pub fn from_parts(l: DMatrix<Complex64>, m: DMatrix<Complex64>, x_true: Param) -> Result<Self> {
        let dim = l.nrows();
        if l.ncols() != dim || m.nrows() != dim || x_true.len() != dim {
            return Err(Error::Shape(format!(
                "operator {}x{}, sources {}x{}, truth {}",
                l.nrows(),
                l.ncols(),
                m.nrows(),
                m.ncols(),
                x_true.len()
            )));
        }
        Self::about(
            Arc::new(l),
            Arc::new(m),
            Arc::new(x_true),
            Param::zeros(dim),
            Arc::new(AtomicUsize::new(0)),
        )
    }

    fn about(
        l: Arc<DMatrix<Complex64>>,
        m: Arc<DMatrix<Complex64>>,
        x_true: Arc<Param>,
        x_ref: Param,
        solves: Arc<AtomicUsize>,
    ) -> Result<Self> {
        let shifted = l.as_ref() - diag_of(&x_ref);
        let lu = shifted.clone().lu();
        let mut model = Self {
            l,
            m,
            x_true,
            x_ref,
            shifted,
            lu,
            f_ref: Data::zeros(0, 0),
            solves,
        };
        let t = model.solve_shifted(model.m.as_ref().clone())?;
        model.f_ref = model.m.transpose() * t;
        Ok(model)
    }

    pub fn x_true(&self) -> &Param {
        &self.x_true
    }

    pub fn sources(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    /// Background solve `L0^{-1} rhs` against the cached factorization, with
    /// the same residual acceptance rule as the sparse systems.
    fn solve_shifted(&self, rhs: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let sol = self.lu.solve(&rhs).ok_or(Error::SingularOperator)?;
        verify_residual(&self.shifted, &sol, &rhs)?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(sol)
    }

    /// Dense linearization with rows in flattened measurement order. With
    /// `T = L0^{-1} M` and `L0` symmetric, the entry at row `(i, j)`, column
    /// `c` is `T[c, i] * T[c, j]`.
    pub fn assemble_jacobian(&self) -> Result<DMatrix<Complex64>> {
        let t = self.solve_shifted(self.m.as_ref().clone())?;
        let n = self.m.ncols();
        Ok(DMatrix::from_fn(n * n, self.param_dim(), |r, c| {
            let (i, j) = (r / n, r % n);
            t[(c, i)] * t[(c, j)]
        }))
    }
}

fn verify_residual(a: &DMatrix<Complex64>, x: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<()> {
    let mismatch = a * x - b;
    let resid = mismatch.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let scale = b.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if resid > RESIDUAL_TOL * scale {
        return Err(Error::SingularOperator);
    }
    Ok(())
}

impl ForwardModel for ToyModel {
    fn param_dim(&self) -> usize {
        self.l.nrows()
    }

    fn data_size(&self) -> usize {
        self.m.ncols()
    }

    fn expansion_point(&self) -> &Param {
        &self.x_ref
    }

    fn data_at_expansion(&self) -> &Data {
        &self.f_ref
    }

    fn evaluate(&self, x: &Param) -> Result<Data> {
        if x.len() != self.param_dim() {
            return Err(Error::Shape(format!(
                "parameter has {} entries, model has {}",
                x.len(),
                self.param_dim()
            )));
        }
        let shifted = self.l.as_ref() - diag_of(x);
        let lu = shifted.clone().lu();
        let sol = lu.solve(self.m.as_ref()).ok_or(Error::SingularOperator)?;
        verify_residual(&shifted, &sol, self.m.as_ref())?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(self.m.transpose() * sol)
    }

    fn apply_a(&self, args: &[&Param]) -> Result<Data> {
        if args.is_empty() {
            return Err(Error::Shape("expansion coefficient needs at least one argument".into()));
        }
        for a in args {
            if a.len() != self.param_dim() {
                return Err(Error::Shape(format!(
                    "perturbation has {} entries, model has {}",
                    a.len(),
                    self.param_dim()
                )));
            }
        }
        // Innermost factor first: L0^{-1} M, then scale rows by each slot
        // function and solve again, outward through the tuple.
        let mut t = self.solve_shifted(self.m.as_ref().clone())?;
        for arg in args.iter().rev() {
            for i in 0..t.nrows() {
                let v = arg[i];
                for j in 0..t.ncols() {
                    t[(i, j)] *= v;
                }
            }
            t = self.solve_shifted(t)?;
        }
        Ok(self.m.transpose() * t)
    }

    fn reexpand(&self, x: &Param) -> Result<Self> {
        Self::about(
            self.l.clone(),
            self.m.clone(),
            self.x_true.clone(),
            x.clone(),
            self.solves.clone(),
        )
    }

    fn build_b1(&self, tau: f64) -> Result<LinearInverse> {
        LinearInverse::from_jacobian(&self.assemble_jacobian()?, tau)
    }

    fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

/// `M^T (L - diag(h))^{-1} M` at an absolute parameter `h`.
pub fn toy_forward(model: &ToyModel, h: &Param) -> Result<Data> {
    model.evaluate(h)
}

/// The expansion coefficient of order `etas.len()` applied to the tuple,
/// evaluated by repeated background solves.
pub fn toy_apply_a(model: &ToyModel, etas: &[&Param]) -> Result<Data> {
    model.apply_a(etas)
}

/// Runs the summed series and both restarted methods on the model's own
/// synthetic data and returns their traces: summed series partial sums
/// through order 8, then 8 steps each of the order-1 and order-2 restarts.
///
/// Each run takes one extra step past the displayed range; that final
/// iterate stands in for the unavailable limit, and `error_to_truth` in the
/// traces measures against it. The last step of every trace is therefore the
/// proxy itself, excluded by [`write_comparison_csv`].
pub fn fig1_experiment(model: &ToyModel, tau: f64) -> Result<[IterationTrace; 3]> {
    let displayed = 8;
    let y = model.evaluate(model.x_true())?;
    let d = &y - model.data_at_expansion();

    let b1 = model.build_b1(tau)?;
    let (_, mut summed) = inverse_series_sum(model, &b1, &d, displayed + 1)?;
    summed.method = "ibs".into();
    let (_, mut gn) = gauss_newton_run(model, &y, displayed + 1, tau)?;
    let (_, mut ch) = chebyshev_halley_run(model, &y, displayed + 1, tau)?;

    for trace in [&mut summed, &mut gn, &mut ch] {
        let proxy = trace
            .final_iterate()
            .cloned()
            .ok_or_else(|| Error::Shape("empty trace".into()))?;
        trace.set_truth(&proxy);
    }
    Ok([summed, gn, ch])
}

/// Writes `method,step,iterate_error,residual`, one row per displayed step.
/// The final step of each trace is the limit proxy and is not written.
pub fn write_comparison_csv(path: &Path, traces: &[IterationTrace]) -> std::io::Result<()> {
    let mut out = String::from("method,step,iterate_error,residual\n");
    for trace in traces {
        let shown = trace.steps.len().saturating_sub(1);
        for s in &trace.steps[..shown] {
            out.push_str(&format!(
                "{},{},{},{}\n",
                trace.method,
                s.step,
                fmt_float(s.error_to_truth.unwrap_or(f64::NAN)),
                fmt_float(s.residual_norm)
            ));
        }
    }
    std::fs::write(path, out)
}

/// Least-squares slope of `log r_(n+1)` against `log r_n` over consecutive
/// residual pairs above `floor`: the empirical convergence order. Returns
/// `NaN` when fewer than two pairs survive.
pub fn fitted_order(residuals: &[f64], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> = residuals
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in &pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{data_norm, param_norm, vec_data};

    fn small_model(seed: u64) -> ToyModel {
        // Same construction at a size where dense checks are immediate.
        let dim = 24;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |scale: f64| {
            let v: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(scale * v, 0.0)
        };
        let l = tridiagonal(dim);
        let m = DMatrix::from_fn(dim, 3, |_, _| draw(1.0));
        let x_true = Param::from_fn(dim, |_, _| draw(0.1));
        ToyModel::from_parts(l, m, x_true).unwrap()
    }

    #[test]
    fn standard_instance_is_reproducible() {
        let a = ToyModel::standard(11).unwrap();
        let b = ToyModel::standard(11).unwrap();
        let c = ToyModel::standard(12).unwrap();
        assert_eq!(a.param_dim(), TOY_DIM);
        assert_eq!(a.data_size(), TOY_SOURCES);
        assert_eq!(a.sources(), b.sources());
        assert_eq!(a.x_true(), b.x_true());
        assert_ne!(a.x_true(), c.x_true());
        let spread = (a.x_true().iter().map(|z| z.norm_sqr()).sum::<f64>() / TOY_DIM as f64).sqrt();
        assert!((0.05..0.15).contains(&spread), "true-parameter spread {spread}");
    }

    #[test]
    fn partial_sums_match_the_direct_solve() {
        let model = ToyModel::standard(11).unwrap();
        let h = model.x_true().clone();
        let y = toy_forward(&model, &h).unwrap();

        let mut sum = model.data_at_expansion().clone();
        let mut remainders = Vec::new();
        for order in 1..=30 {
            let args = vec![&h; order];
            sum += toy_apply_a(&model, &args).unwrap();
            remainders.push(data_norm(&(&y - &sum)));
        }
        let rel = remainders.last().unwrap() / data_norm(&y);
        assert!(rel < 1e-8, "30-term relative remainder {rel}");

        // The remainder is a geometric tail: its observed ratio cannot beat
        // the contraction norm of L^{-1} diag(h).
        let lu = tridiagonal(TOY_DIM).lu();
        let b = lu.solve(&diag_of(&h)).unwrap();
        let contraction = (0..b.nrows())
            .map(|i| b.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0f64, f64::max);
        assert!(contraction < 1.0, "contraction norm {contraction}");
        for w in remainders.windows(2).take(12) {
            if w[1] < 1e-14 * data_norm(&y) {
                break;
            }
            let ratio = w[1] / w[0];
            assert!(ratio <= contraction * 1.05, "ratio {ratio} vs norm {contraction}");
        }
    }

    #[test]
    fn zero_perturbation_reduces_to_the_background() {
        let model = small_model(3);
        let f0 = toy_forward(&model, &Param::zeros(model.param_dim())).unwrap();
        assert!(data_norm(&(&f0 - model.data_at_expansion())) < 1e-12);

        // L and diag(h) are symmetric, so every measurement matrix is too.
        let f = toy_forward(&model, model.x_true()).unwrap();
        assert!(data_norm(&(&f - &f.transpose())) < 1e-12);
    }

    #[test]
    fn zero_slot_annihilates_the_coefficient() {
        let model = small_model(4);
        let h = model.x_true().clone();
        let zero = Param::zeros(model.param_dim());
        let out = toy_apply_a(&model, &[&h, &zero, &h]).unwrap();
        assert!(data_norm(&out) == 0.0, "zero slot produced {}", data_norm(&out));
    }

    #[test]
    fn first_coefficient_matches_a_difference_quotient() {
        let model = small_model(5);
        let h = model.x_true().clone();
        let a1 = toy_apply_a(&model, &[&h]).unwrap();

        let central = |t: f64| -> Data {
            let plus = toy_forward(&model, &(&h * Complex64::new(t, 0.0))).unwrap();
            let minus = toy_forward(&model, &(&h * Complex64::new(-t, 0.0))).unwrap();
            (plus - minus) / Complex64::new(2.0 * t, 0.0)
        };
        // One Richardson level kills the t^2 term of the central difference.
        let d1 = central(1e-2);
        let d2 = central(5e-3);
        let extrap = (&d2 * Complex64::new(4.0, 0.0) - &d1) / Complex64::new(3.0, 0.0);
        let rel = data_norm(&(&extrap - &a1)) / data_norm(&a1);
        assert!(rel < 1e-6, "derivative mismatch {rel}");
    }

    #[test]
    fn coefficients_are_linear_in_each_slot() {
        let model = small_model(6);
        let dim = model.param_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut vec = || {
            Param::from_fn(dim, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(v, 0.5 * v * v)
            })
        };
        let (u, v, w) = (vec(), vec(), vec());
        let c = Complex64::new(0.7, -0.3);
        for slot in 0..2 {
            let scaled = &u * c + &v;
            let (args_combined, args_u, args_v): (Vec<&Param>, Vec<&Param>, Vec<&Param>) = if slot == 0 {
                (vec![&scaled, &w], vec![&u, &w], vec![&v, &w])
            } else {
                (vec![&w, &scaled], vec![&w, &u], vec![&w, &v])
            };
            let lhs = toy_apply_a(&model, &args_combined).unwrap();
            let rhs = toy_apply_a(&model, &args_u).unwrap() * c + toy_apply_a(&model, &args_v).unwrap();
            let rel = data_norm(&(&lhs - &rhs)) / data_norm(&rhs);
            assert!(rel < 1e-12, "slot {slot} linearity off by {rel}");
        }
    }

    #[test]
    fn jacobian_columns_are_unit_coefficients() {
        let model = small_model(7);
        let jac = model.assemble_jacobian().unwrap();
        for c in [0, 5, model.param_dim() - 1] {
            let mut e = Param::zeros(model.param_dim());
            e[c] = Complex64::new(1.0, 0.0);
            let col = vec_data(&toy_apply_a(&model, &[&e]).unwrap());
            let err = (&col - &jac.column(c).clone_owned())
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-12, "column {c} off by {err}");
        }
    }

    #[test]
    fn reexpansion_moves_the_base_point() {
        let model = small_model(8);
        let x0 = model.x_true() * Complex64::new(0.5, 0.0);
        let shifted = model.reexpand(&x0).unwrap();
        assert!(param_norm(&(shifted.expansion_point() - &x0)) == 0.0);
        let direct = model.evaluate(&x0).unwrap();
        assert!(data_norm(&(shifted.data_at_expansion() - &direct)) < 1e-12);

        // First coefficient about the new point, against a central difference.
        let h = model.x_true().clone();
        let a1 = shifted.apply_a(&[&h]).unwrap();
        let central = |t: f64| -> Data {
            let plus = model.evaluate(&(&x0 + &h * Complex64::new(t, 0.0))).unwrap();
            let minus = model.evaluate(&(&x0 - &h * Complex64::new(t, 0.0))).unwrap();
            (plus - minus) / Complex64::new(2.0 * t, 0.0)
        };
        let d1 = central(1e-2);
        let d2 = central(5e-3);
        let extrap = (&d2 * Complex64::new(4.0, 0.0) - &d1) / Complex64::new(3.0, 0.0);
        let rel = data_norm(&(&extrap - &a1)) / data_norm(&a1);
        assert!(rel < 1e-6, "shifted derivative mismatch {rel}");
    }

    #[test]
    fn comparison_traces_converge_and_repeat() {
        let model = ToyModel::standard(11).unwrap();
        let traces = fig1_experiment(&model, 1e-6).unwrap();
        let [summed, gn, ch] = &traces;
        assert_eq!(summed.method, "ibs");
        assert_eq!(gn.method, "gauss-newton");
        assert_eq!(ch.method, "chebyshev-halley");
        for trace in &traces {
            assert_eq!(trace.steps.len(), 10);
        }

        // The first restart steps coincide with the first partial sums.
        let gn1 = param_norm(&(&gn.steps[1].iterate - &summed.steps[1].iterate));
        let ch1 = param_norm(&(&ch.steps[1].iterate - &summed.steps[2].iterate));
        assert!(gn1 < 1e-10, "order-1 restart first step off by {gn1}");
        assert!(ch1 < 1e-10, "order-2 restart first step off by {ch1}");

        // Summed series: residual falls monotonically through the shown range.
        for w in summed.steps.windows(2).take(8) {
            assert!(w[1].residual_norm < w[0].residual_norm);
        }
        // Restarts: converged far below the starting residual.
        let r0 = gn.steps[0].residual_norm;
        assert!(gn.final_residual().unwrap() < 1e-10 * r0);
        assert!(ch.final_residual().unwrap() < 1e-10 * r0);

        let rerun = fig1_experiment(&model, 1e-6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_comparison_csv(&p1, &traces).unwrap();
        write_comparison_csv(&p2, &rerun).unwrap();
        let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(b1, b2, "comparison run is not reproducible");
        let text = String::from_utf8(b1).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 9);
        assert!(text.lines().nth(1).unwrap().starts_with("ibs,0,"));
    }

    #[test]
    fn fitted_order_recovers_known_rates() {
        // Clean geometric decay: slope 1.
        let linear: Vec<f64> = (0..8).map(|n| 0.5f64.powi(n)).collect();
        assert!((fitted_order(&linear, 1e-30) - 1.0).abs() < 1e-12);
        // Quadratic decay r_{n+1} = r_n^2: slope 2, floor excludes the tail.
        let quad: Vec<f64> = (0..6).map(|n| 0.1f64.powi(1 << n)).collect();
        let slope = fitted_order(&quad, 1e-20);
        assert!((slope - 2.0).abs() < 1e-6, "quadratic slope {slope}");
        assert!(fitted_order(&[1.0, 0.1], 0.5).is_nan());
    }
}
