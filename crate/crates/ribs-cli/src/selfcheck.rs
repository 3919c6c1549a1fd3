//! Fast cross-module invariant checks, one printed line each. These are
//! smaller instances of the keystone properties: series reversion against
//! the classical coefficients, first-restart identities, left-inverse
//! accuracy, Jacobian consistency, the change of variables between the
//! aquifer and Schrodinger problems, the two-frequency split, and the
//! coefficient-norm bounds.

use std::sync::Arc;

use num_complex::Complex64;

use ribs::bounds::{operator_norm_probe, GreenColumnSet};
use ribs::engine::{
    chebyshev_halley_run, forward_series_sum, gauss_newton_run, inverse_series_sum, param_norm,
    vec_data, Data, ForwardModel, Param, PolynomialModel, SeriesEvaluator,
};
use ribs::hydro::{hydro_forward, liouville_potential, two_freq_split, AquiferParams};
use ribs::numerics::Grid2D;
use ribs::schrodinger::{forward_map, PotentialField, SchrodingerModel, WellSet};
use ribs::toy::ToyModel;

use crate::CliError;

pub fn run(seed: u64) -> Result<(), CliError> {
    let results: [(&str, Result<String, String>); 7] = [
        ("series-reversion", series_reversion()),
        ("toy-first-iterates", toy_first_iterates(seed)),
        ("polynomial-roundtrip", polynomial_roundtrip()),
        ("jacobian-spot", jacobian_spot()),
        ("liouville-consistency", liouville_consistency(seed)),
        ("frequency-split", frequency_split(seed)),
        ("coefficient-bounds", coefficient_bounds(seed)),
    ];
    let mut failed = 0usize;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("selfcheck {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("selfcheck {name}: FAIL ({detail})");
            }
        }
    }
    let total = results.len();
    println!("selfcheck: {} of {total} passed", total - failed);
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {total} selfchecks failed")));
    }
    Ok(())
}

fn lib<T>(r: ribs::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Inverse-series coefficients of f(h) = h + h^2 are the signed Catalan
/// numbers.
fn series_reversion() -> Result<String, String> {
    let one = Complex64::new(1.0, 0.0);
    let model = PolynomialModel::scalar(&[one, one]);
    let b1 = lib(model.build_b1(1e-12))?;
    let mut ev = SeriesEvaluator::new(&model, &b1);
    let terms = lib(ev.terms(&Data::from_element(1, 1, one), 6))?;
    let oracle = [1.0, -1.0, 2.0, -5.0, 14.0, -42.0];
    let worst = terms
        .iter()
        .zip(&oracle)
        .map(|(u, &c)| (u[0] - Complex64::new(c, 0.0)).norm())
        .fold(0.0, f64::max);
    check(worst < 1e-12, format!("max coefficient error {worst:.1e}"))
}

/// One restart of order 1 equals the 1-term partial sum; one restart of
/// order 2 equals the 2-term partial sum.
fn toy_first_iterates(seed: u64) -> Result<String, String> {
    let model = lib(ToyModel::standard(seed))?;
    let y = lib(model.evaluate(model.x_true()))?;
    let d = &y - model.data_at_expansion();
    let b1 = lib(model.build_b1(1e-6))?;
    let (_, s) = lib(inverse_series_sum(&model, &b1, &d, 2))?;
    let (_, gn) = lib(gauss_newton_run(&model, &y, 1, 1e-6))?;
    let (_, ch) = lib(chebyshev_halley_run(&model, &y, 1, 1e-6))?;
    let g1 = param_norm(&(&gn.steps[1].iterate - &s.steps[1].iterate));
    let g2 = param_norm(&(&ch.steps[1].iterate - &s.steps[2].iterate));
    check(g1 < 1e-10 && g2 < 1e-10, format!("first-step gaps {g1:.1e} / {g2:.1e}"))
}

/// The order-4 inverse series inverts a cubic model to high accuracy at a
/// small parameter.
fn polynomial_roundtrip() -> Result<String, String> {
    let model = PolynomialModel::random(2, 4, 3, 23);
    let b1 = lib(model.build_b1(1e-12))?;
    let h = Param::from_fn(4, |i, _| Complex64::new(0.3 + 0.1 * i as f64, 0.2 - 0.05 * i as f64))
        .scale(0.05);
    let d = lib(forward_series_sum(&model, &h, model.degree()))?;
    let (g, _) = lib(inverse_series_sum(&model, &b1, &d, 4))?;
    let err = param_norm(&(&g - &h)) / param_norm(&h);
    check(err < 1e-3, format!("order-4 relative roundtrip error {err:.1e}"))
}

/// Assembled Jacobian columns agree with central differences on a sample of
/// nodes across the region.
fn jacobian_spot() -> Result<String, String> {
    let grid = Grid2D::new(30);
    let wells = Arc::new(WellSet::standard().rasterize(grid));
    let model = lib(SchrodingerModel::new(&PotentialField::zero(grid), wells, 0.1))?;
    let jac = model.assemble_jacobian();
    let p = model.param_dim();
    let delta = 3e-4;
    let mut worst = 0.0f64;
    for j in [0, p / 4, p / 2, 3 * p / 4, p - 1] {
        let mut hp = Param::zeros(p);
        hp[j] = Complex64::new(delta, 0.0);
        let fp = vec_data(&lib(model.evaluate(&hp))?);
        hp[j] = Complex64::new(-delta, 0.0);
        let fm = vec_data(&lib(model.evaluate(&hp))?);
        let fd = (fp - fm) / Complex64::new(2.0 * delta, 0.0);
        let col = jac.column(j);
        worst = worst.max((&fd - &col).norm() / col.norm());
    }
    check(worst < 1e-4, format!("worst sampled column error {worst:.1e}"))
}

/// Aquifer data equals Schrodinger data of the Liouville potential with
/// scaled wells, up to discretization.
fn liouville_consistency(seed: u64) -> Result<String, String> {
    let grid = Grid2D::new(48);
    let truth = AquiferParams::random_smooth(grid, seed);
    let wells = WellSet::standard().rasterize(grid);
    let hydro = lib(hydro_forward(&truth, 10.0, &wells))?;
    let q = liouville_potential(&truth, 10.0);
    let scaled = wells.scaled_by_inverse(&truth.sqrt_sigma());
    let schro = lib(forward_map(&q.field, &scaled))?;
    let num = (&hydro.mhat + &schro).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let den = hydro.mhat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rel = num / den;
    check(rel < 1e-2, format!("relative mismatch {rel:.1e} at 48 cells"))
}

/// Splitting exact potentials built at two frequencies returns the exact
/// frequency-independent part and slope.
fn frequency_split(seed: u64) -> Result<String, String> {
    let grid = Grid2D::new(40);
    let truth = AquiferParams::random_smooth(grid, seed.wrapping_add(1));
    let q1 = liouville_potential(&truth, 1.0);
    let q2 = liouville_potential(&truth, 10.0);
    let split = lib(two_freq_split(&q1, &q2))?;
    let r1_want = q1.field.real_values();
    let r2_want = q1.field.imag_values();
    let e1 = (&split.r1 - &r1_want).amax();
    let e2 = (&split.r2 - &r2_want).amax();
    let tol1 = 1e-12 * (1.0 + r1_want.amax());
    let tol2 = 1e-12 * (1.0 + r2_want.amax());
    check(
        e1 <= tol1 && e2 <= tol2 && split.imag_residue <= tol1,
        format!("roundtrip errors {e1:.1e} / {e2:.1e}"),
    )
}

/// Randomized coefficient-norm probes stay under the geometric bound
/// nu * mu^(n-1).
fn coefficient_bounds(seed: u64) -> Result<String, String> {
    let grid = Grid2D::new(30);
    let q0 = PotentialField::zero(grid);
    let wells = WellSet::standard().rasterize(grid);
    let region = grid.margin_region(0.1);
    let columns = lib(GreenColumnSet::sample(&q0, 2))?;
    let mu = lib(columns.mu_over(&region))?;
    let nu = lib(columns.nu_over(&region, &wells))?;
    let model = lib(SchrodingerModel::new(&q0, Arc::new(wells), 0.1))?;
    for n in 1..=3usize {
        let probe = lib(operator_norm_probe(&model, n, 4, seed))?;
        let bound = nu * mu.powi(n as i32 - 1);
        if probe > bound {
            return Err(format!("order-{n} probe {probe:.2e} above bound {bound:.2e}"));
        }
    }
    Ok(format!("mu {mu:.2e}, nu {nu:.2e}, probes under bounds for n = 1..3"))
}
