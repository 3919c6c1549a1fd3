//! Convergence constants and radii for the measurement series.
//!
//! The series coefficients obey `||a_n|| <= alpha * mu^n` with `alpha =
//! nu / mu`, where `mu` bounds the mass of the background Green kernel over
//! the retrieval region and `nu` additionally folds in the source profiles.
//! Both constants are approximated by solving the background problem with
//! discrete point sources on a subsampled lattice and integrating the
//! resulting columns. From `mu`, `nu` and a norm for the primer `b_1`, the
//! remaining radii and the truncation tail are closed-form arithmetic,
//! collected in [`BoundsReport`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{data_norm, ForwardModel, Param};
use crate::error::{Error, Result};
use crate::numerics::{fmt_float, Grid2D, NodeRegion};
use crate::schrodinger::{assemble_operator, PotentialField, WellFields};

/// Default subsampling of the source-point lattice: every 4th node per axis.
pub const DEFAULT_STRIDE: usize = 4;

/// Right-hand sides batched per direct solve.
const SOLVE_CHUNK: usize = 16;

/// Absolute values of background Green columns, one per sampled source node.
///
/// Source nodes are the interior nodes whose indices are multiples of
/// `stride` on both axes. Anchoring at index multiples (rather than at
/// region-relative offsets) makes the sample sets nest: shrinking the region
/// only removes points, and doubling the grid while doubling the stride keeps
/// the same physical sources. Columns are computed once and reused for every
/// region, so a whole margin sweep costs one factorization.
pub struct GreenColumnSet {
    grid: Grid2D,
    stride: usize,
    points: Vec<(usize, usize)>,
    /// `n_nodes x points.len()`, entry = |column value| at the node.
    abs_columns: DMatrix<f64>,
}

impl GreenColumnSet {
    /// Solves one background problem per sampled source node. The discrete
    /// delta carries the value `1/h^2` so the columns approximate the
    /// continuum kernel.
    pub fn sample(q0: &PotentialField, stride: usize) -> Result<Self> {
        assert!(stride >= 1, "stride must be positive");
        let grid = q0.grid();
        let points: Vec<(usize, usize)> = grid
            .interior_nodes()
            .filter(|&(k, l)| k % stride == 0 && l % stride == 0)
            .collect();
        if points.is_empty() {
            return Err(Error::Shape(format!(
                "stride {stride} samples no interior nodes on a {}-cell grid",
                grid.n_cells()
            )));
        }
        let system = assemble_operator(q0)?;
        let delta = Complex64::new(1.0 / (grid.h() * grid.h()), 0.0);

        let chunks: Vec<Vec<DVector<f64>>> = points
            .par_chunks(SOLVE_CHUNK)
            .map(|chunk| {
                let mut rhs = DMatrix::zeros(grid.n_interior(), chunk.len());
                for (j, &(k, l)) in chunk.iter().enumerate() {
                    rhs[(grid.interior_index(k, l), j)] = delta;
                }
                let sol = system.solve_many(&rhs)?;
                let cols = (0..chunk.len())
                    .map(|j| {
                        let mut full = DVector::zeros(grid.n_nodes());
                        for (k, l) in grid.interior_nodes() {
                            full[grid.node_index(k, l)] = sol[(grid.interior_index(k, l), j)].norm();
                        }
                        full
                    })
                    .collect();
                Ok(cols)
            })
            .collect::<Result<Vec<_>>>()?;
        let flat: Vec<DVector<f64>> = chunks.into_iter().flatten().collect();
        let abs_columns = DMatrix::from_columns(&flat);
        Ok(Self { grid, stride, points, abs_columns })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Trapezoid weights of `region`, spread over the full node vector.
    fn region_weights(&self, region: &NodeRegion) -> DVector<f64> {
        let mut w = DVector::zeros(self.grid.n_nodes());
        for (k, l) in region.nodes() {
            w[self.grid.node_index(k, l)] = region.quad_weight(self.grid, k, l);
        }
        w
    }

    fn max_over_region<'a>(
        &'a self,
        region: &'a NodeRegion,
        vals: impl Fn(usize) -> f64 + 'a,
    ) -> Option<f64> {
        self.points
            .iter()
            .enumerate()
            .filter(|&(_, &(k, l))| region.contains(k, l))
            .map(|(idx, _)| vals(idx))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    fn no_sources(&self) -> Error {
        Error::Shape(format!(
            "no sampled source nodes inside the region at stride {}",
            self.stride
        ))
    }

    /// Largest trapezoid `L^1(region)` mass over sampled columns with source
    /// inside the region.
    pub fn mu_over(&self, region: &NodeRegion) -> Result<f64> {
        let w = self.region_weights(region);
        let masses = w.transpose() * &self.abs_columns;
        self.max_over_region(region, |idx| masses[(0, idx)])
            .ok_or_else(|| self.no_sources())
    }

    /// `(sup_i sup_x integral of |column| * phi_i over the region)^2`; the
    /// outer factor `|Omega| = 1` for the unit square.
    pub fn nu_over(&self, region: &NodeRegion, wells: &WellFields) -> Result<f64> {
        if wells.grid() != self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.n_nodes(),
                got: wells.grid().n_nodes(),
            });
        }
        let w = self.region_weights(region);
        let mut sup: Option<f64> = None;
        for i in 0..wells.count() {
            let weighted = w.component_mul(wells.field(i));
            let vals = weighted.transpose() * &self.abs_columns;
            let m = self.max_over_region(region, |idx| vals[(0, idx)]);
            sup = match (sup, m) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        sup.map(|s| s * s).ok_or_else(|| self.no_sources())
    }
}

/// Kernel-mass constant `mu` over `region` for background `q0`.
pub fn estimate_mu(q0: &PotentialField, region: &NodeRegion, stride: usize) -> Result<f64> {
    GreenColumnSet::sample(q0, stride)?.mu_over(region)
}

/// Source-weighted constant `nu` over `region` for background `q0`.
pub fn estimate_nu(
    q0: &PotentialField,
    region: &NodeRegion,
    wells: &WellFields,
    stride: usize,
) -> Result<f64> {
    GreenColumnSet::sample(q0, stride)?.nu_over(region, wells)
}

/// Convergence constants and radii derived from `mu`, `nu` and `||b_1||`.
#[derive(Clone, Debug)]
pub struct BoundsReport {
    pub mu: f64,
    pub nu: f64,
    /// `nu / mu`.
    pub alpha: f64,
    /// Coefficient-growth constant; infinite when the condition fails.
    pub beta: f64,
    pub b1_norm: f64,
    /// The forward series converges for perturbations below `1/mu`.
    pub forward_radius: f64,
    /// The primer must satisfy `||b_1|| < 1 / ((1 + alpha) mu)`.
    pub b1_condition: f64,
    /// The inverse series converges for data below this norm.
    pub data_radius: f64,
    /// `(1 + alpha) * mu * ||b_1||`; everything above requires this `< 1`.
    pub condition: f64,
    pub valid: bool,
}

impl BoundsReport {
    pub fn check(&self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            Err(Error::ConditionViolated(self.condition))
        }
    }

    /// Bound on the error of truncating the inverse series after `n_terms`
    /// terms at data norm `data_norm`: `beta * rho^(N+1) / (1 - rho)` with
    /// `rho = condition * data_norm`. Infinite outside the radius.
    pub fn tail(&self, n_terms: usize, data_norm: f64) -> f64 {
        let rho = self.condition * data_norm;
        if !self.valid || rho >= 1.0 {
            return f64::INFINITY;
        }
        self.beta * rho.powi(n_terms as i32 + 1) / (1.0 - rho)
    }
}

/// Assembles the report from the two kernel constants and the primer norm.
/// A violated smallness condition flags the report instead of failing, so
/// callers can still print the diagnosis; [`BoundsReport::check`] turns the
/// flag into an error.
pub fn convergence_report(mu: f64, nu: f64, b1_norm: f64) -> BoundsReport {
    assert!(mu > 0.0 && mu.is_finite(), "mu must be positive, got {mu}");
    assert!(nu >= 0.0 && nu.is_finite(), "nu must be nonnegative, got {nu}");
    assert!(b1_norm > 0.0, "b1 norm must be positive, got {b1_norm}");
    let alpha = nu / mu;
    let condition = (1.0 + alpha) * mu * b1_norm;
    let valid = condition < 1.0;
    let beta = if valid {
        b1_norm * (1.0 / (1.0 - condition)).exp()
    } else {
        f64::INFINITY
    };
    BoundsReport {
        mu,
        nu,
        alpha,
        beta,
        b1_norm,
        forward_radius: 1.0 / mu,
        b1_condition: 1.0 / ((1.0 + alpha) * mu),
        data_radius: 1.0 / condition,
        condition,
        valid,
    }
}

/// One row of the margin sweep.
#[derive(Clone, Copy, Debug)]
pub struct RadiusRow {
    pub epsilon: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub data_radius: f64,
}

/// Data radius as a function of the margin width, at a fixed primer norm
/// (`b1_norm = 1` reproduces the usual normalization). All rows share one
/// set of Green columns; since both `mu` and `nu` shrink when the region
/// shrinks, the radius `1 / ((mu + nu) ||b_1||)` is nondecreasing in the
/// margin by construction.
pub fn radius_vs_epsilon(
    q0: &PotentialField,
    wells: &WellFields,
    eps_list: &[f64],
    stride: usize,
    b1_norm: f64,
) -> Result<Vec<RadiusRow>> {
    let columns = GreenColumnSet::sample(q0, stride)?;
    eps_list
        .iter()
        .map(|&eps| {
            let region = q0.grid().margin_region(eps);
            let mu = columns.mu_over(&region)?;
            let nu = columns.nu_over(&region, wells)?;
            let report = convergence_report(mu, nu, b1_norm);
            Ok(RadiusRow { epsilon: eps, mu, nu, alpha: report.alpha, data_radius: report.data_radius })
        })
        .collect()
}

pub fn write_radius_csv(path: &Path, rows: &[RadiusRow]) -> std::io::Result<()> {
    let mut out = String::from("epsilon,mu,nu,alpha,data_radius\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(r.epsilon),
            fmt_float(r.mu),
            fmt_float(r.nu),
            fmt_float(r.alpha),
            fmt_float(r.data_radius)
        ));
    }
    std::fs::write(path, out)
}

/// Randomized lower bound on the induced norm of the order-`n` coefficient:
/// the largest `||a_n(eta_1, ..., eta_n)||` over unit-sup-norm probe tuples.
///
/// The first tuple is all-ones; for a kernel of one sign it realizes the
/// induced norm exactly, which keeps the bound sharp at order one. The
/// remaining `trials - 1` tuples have independent `+-1` entries.
pub fn operator_norm_probe<M: ForwardModel>(
    model: &M,
    order: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    assert!(order >= 1, "order must be positive");
    assert!(trials >= 1, "at least one probe tuple is required");
    let p = model.param_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for trial in 0..trials {
        let args: Vec<Param> = (0..order)
            .map(|_| {
                DVector::from_fn(p, |_, _| {
                    if trial == 0 || rng.random::<bool>() {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(-1.0, 0.0)
                    }
                })
            })
            .collect();
        let refs: Vec<&Param> = args.iter().collect();
        best = best.max(data_norm(&model.apply_a(&refs)?));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::numerics::SparseSystem;
    use crate::schrodinger::{SchrodingerModel, WellSet};

    fn zero_background(n: usize) -> (Grid2D, PotentialField, WellFields) {
        let grid = Grid2D::new(n);
        (grid, PotentialField::zero(grid), WellSet::standard().rasterize(grid))
    }

    /// In one dimension the 3-point stencil reproduces the kernel
    /// `min(x, y) - x y` exactly at the nodes (the kernel is piecewise
    /// linear with its kink on a node), and the trapezoid rule integrates
    /// piecewise-linear functions exactly. The peak column mass is then
    /// `max_y y(1 - y)/2 = 1/8`, attained at `y = 1/2`, a node for even `n`.
    /// This pins the delta scaling and the mass quadrature to a closed form.
    #[test]
    fn one_dimensional_green_mass_is_an_eighth() {
        let n = 64usize;
        let h = 1.0 / n as f64;
        let inv_h2 = Complex64::new(1.0 / (h * h), 0.0);
        let mut trips = Vec::new();
        for i in 0..n - 1 {
            trips.push((i, i, 2.0 * inv_h2));
            if i + 1 < n - 1 {
                trips.push((i, i + 1, -inv_h2));
                trips.push((i + 1, i, -inv_h2));
            }
        }
        let sys = SparseSystem::factorize(n - 1, &trips).unwrap();
        let mut best = 0.0f64;
        for j in 0..n - 1 {
            let mut rhs = DVector::zeros(n - 1);
            rhs[j] = Complex64::new(1.0 / h, 0.0);
            let col = sys.solve(&rhs).unwrap();
            let mass: f64 = col.iter().map(|z| z.norm() * h).sum();
            best = best.max(mass);
        }
        assert!((best - 0.125).abs() < 1e-12, "peak Green mass {best}");
    }

    #[test]
    fn shrinking_the_region_never_raises_the_constants() {
        let (grid, q0, wells) = zero_background(40);
        let cols = GreenColumnSet::sample(&q0, 4).unwrap();
        let eps = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25];
        let mus: Vec<f64> =
            eps.iter().map(|&e| cols.mu_over(&grid.margin_region(e)).unwrap()).collect();
        let nus: Vec<f64> =
            eps.iter().map(|&e| cols.nu_over(&grid.margin_region(e), &wells).unwrap()).collect();
        for w in mus.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "mu rose when the region shrank: {w:?}");
        }
        for w in nus.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "nu rose when the region shrank: {w:?}");
        }
        // Source amplitudes peak at one, so nu can never exceed mu^2.
        for (m, v) in mus.iter().zip(&nus) {
            assert!(*v <= m * m * (1.0 + 1e-12), "nu {v} above mu^2 {}", m * m);
        }
    }

    #[test]
    fn doubling_the_source_amplitudes_quadruples_nu() {
        let (grid, q0, wells) = zero_background(30);
        let cols = GreenColumnSet::sample(&q0, 3).unwrap();
        let region = grid.margin_region(0.1);
        let nu = cols.nu_over(&region, &wells).unwrap();
        let doubled = wells.scaled_by_inverse(&DVector::from_element(grid.n_nodes(), 0.5));
        let nu4 = cols.nu_over(&region, &doubled).unwrap();
        assert!((nu4 / nu - 4.0).abs() < 1e-10, "ratio {}", nu4 / nu);
    }

    #[test]
    fn green_mass_is_stable_under_grid_refinement() {
        let coarse = zero_background(100);
        let fine = zero_background(200);
        // Doubling grid and stride together keeps the same physical sources.
        let mu_c = estimate_mu(&coarse.1, &coarse.0.margin_region(0.1), 4).unwrap();
        let mu_f = estimate_mu(&fine.1, &fine.0.margin_region(0.1), 8).unwrap();
        let rel = (mu_c - mu_f).abs() / mu_f;
        assert!(rel < 0.05, "mu {mu_c} vs {mu_f}, rel {rel}");
    }

    #[test]
    fn nu_is_stable_under_stride_halving() {
        let (grid, q0, wells) = zero_background(40);
        let region = grid.margin_region(0.1);
        let nu4 = estimate_nu(&q0, &region, &wells, 4).unwrap();
        let nu2 = estimate_nu(&q0, &region, &wells, 2).unwrap();
        let rel = (nu4 - nu2).abs() / nu2;
        assert!(rel < 0.05, "nu {nu4} vs {nu2}, rel {rel}");
    }

    #[test]
    fn report_reproduces_the_hand_computed_constants() {
        let r = convergence_report(1.0, 0.0, 0.5);
        assert_eq!(r.alpha, 0.0);
        let beta_expected = 0.5 * std::f64::consts::E.powi(2);
        assert!((r.beta - beta_expected).abs() < 1e-12, "beta {}", r.beta);
        assert!((r.data_radius - 2.0).abs() < 1e-12);
        assert!((r.b1_condition - 1.0).abs() < 1e-12);
        assert!((r.forward_radius - 1.0).abs() < 1e-12);
        assert!(r.valid);
        r.check().unwrap();

        let tails: Vec<f64> = (1..6).map(|n| r.tail(n, 0.8)).collect();
        for w in tails.windows(2) {
            assert!(w[1] < w[0], "tail not strictly decreasing: {w:?}");
        }
        assert!(r.tail(3, 3.0).is_infinite());
    }

    #[test]
    fn violated_condition_is_flagged_but_still_reported() {
        let r = convergence_report(1.0, 0.0, 1.5);
        assert!(!r.valid);
        assert!(r.beta.is_infinite());
        assert!(r.tail(2, 0.1).is_infinite());
        assert!(r.data_radius > 0.0);
        match r.check() {
            Err(Error::ConditionViolated(c)) => assert!((c - 1.5).abs() < 1e-12),
            other => panic!("expected ConditionViolated, got {other:?}"),
        }
    }

    #[test]
    fn data_radius_is_the_b1_condition_over_the_primer_norm() {
        for (mu, nu, b1) in [(0.3, 0.02, 1.7), (2.0, 1.0, 0.1), (0.05, 0.0025, 4.0)] {
            let r = convergence_report(mu, nu, b1);
            let tied = r.b1_condition / b1;
            assert!(
                (r.data_radius - tied).abs() <= 1e-12 * r.data_radius,
                "radius {} vs {}",
                r.data_radius,
                tied
            );
        }
    }

    #[test]
    fn radius_table_rises_with_the_margin() {
        let (_, q0, wells) = zero_background(40);
        let eps = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25];
        let rows = radius_vs_epsilon(&q0, &wells, &eps, 4, 1.0).unwrap();
        assert_eq!(rows.len(), eps.len());
        for w in rows.windows(2) {
            assert!(
                w[1].data_radius >= w[0].data_radius * (1.0 - 1e-12),
                "radius fell from {} to {}",
                w[0].data_radius,
                w[1].data_radius
            );
        }
        for r in &rows[1..] {
            assert!(r.data_radius >= rows[0].data_radius);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("radius.csv");
        write_radius_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epsilon,mu,nu,alpha,data_radius");
        assert_eq!(lines.count(), eps.len());
    }

    #[test]
    fn probe_stays_under_the_coefficient_bound() {
        let (grid, q0, wells) = zero_background(40);
        let wells = Arc::new(wells);
        let model = SchrodingerModel::new(&q0, wells.clone(), 0.1).unwrap();
        let region = grid.margin_region(0.1);
        let cols = GreenColumnSet::sample(&q0, 4).unwrap();
        let mu = cols.mu_over(&region).unwrap();
        let nu = cols.nu_over(&region, &wells).unwrap();
        for order in 1..=3 {
            let probe = operator_norm_probe(&model, order, 4, 17).unwrap();
            let bound = nu * mu.powi(order as i32 - 1);
            assert!(probe <= bound, "order {order}: probe {probe} above bound {bound}");
            assert!(probe > 0.0);
        }
    }

    #[test]
    fn probe_is_deterministic_under_a_fixed_seed() {
        let (_, q0, wells) = zero_background(20);
        let model = SchrodingerModel::new(&q0, Arc::new(wells), 0.1).unwrap();
        let a = operator_norm_probe(&model, 2, 3, 5).unwrap();
        let b = operator_norm_probe(&model, 2, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_order_probe_tracks_the_dense_jacobian_norm() {
        let (_, q0, wells) = zero_background(20);
        let model = SchrodingerModel::new(&q0, Arc::new(wells), 0.1).unwrap();
        let jac = model.assemble_jacobian();
        // Induced norm from sup-norm arguments to max-modulus data: the
        // largest absolute row sum.
        let dense = (0..jac.nrows())
            .map(|r| jac.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let probe = operator_norm_probe(&model, 1, 6, 3).unwrap();
        assert!(probe <= dense * (1.0 + 1e-10), "probe {probe} above dense norm {dense}");
        assert!(probe >= 0.5 * dense, "probe {probe} far below dense norm {dense}");
    }
}
