//! Parameter recovery from reconstructed complex potentials.

use nalgebra::DVector;
use num_complex::Complex64;

use super::ComplexPotential;
use crate::error::{Error, Result};
use crate::numerics::SparseSystem;
use crate::schrodinger::WellFields;

/// Real split of two potentials at distinct frequencies.
#[derive(Clone, Debug)]
pub struct FieldSplit {
    /// Frequency-independent part, `lap(s)/s` for an exact potential pair.
    pub r1: DVector<f64>,
    /// Frequency slope, `S / sigma` for an exact pair.
    pub r2: DVector<f64>,
    /// Largest imaginary part discarded when taking the real solutions; a
    /// diagnostic for how far the pair is from the `r1 + i omega r2` form.
    pub imag_residue: f64,
}

/// Solves `[1, i w1; 1, i w2] [r1; r2] = [Q1; Q2]` at every node and keeps
/// the real parts.
pub fn two_freq_split(q1: &ComplexPotential, q2: &ComplexPotential) -> Result<FieldSplit> {
    if q1.omega == q2.omega {
        return Err(Error::EqualFrequencies(q1.omega));
    }
    let grid = q1.field.grid();
    if grid.n_cells() != q2.field.grid().n_cells() {
        return Err(Error::GridMismatch {
            expected: grid.n_cells(),
            got: q2.field.grid().n_cells(),
        });
    }
    let n = grid.n_nodes();
    let mut r1 = DVector::zeros(n);
    let mut r2 = DVector::zeros(n);
    let mut residue = 0.0f64;
    let denom = Complex64::new(0.0, q2.omega - q1.omega);
    for idx in 0..n {
        let a = q1.field.values()[idx];
        let b = q2.field.values()[idx];
        let slope = (b - a) / denom;
        let base = a - Complex64::new(0.0, q1.omega) * slope;
        r1[idx] = base.re;
        r2[idx] = slope.re;
        residue = residue.max(base.im.abs()).max(slope.im.abs());
    }
    Ok(FieldSplit { r1, r2, imag_residue: residue })
}

/// Recovered conductivity with the clamp diagnostic.
pub struct SigmaRecovery {
    /// Nodal conductivity: solved outside the wells, copied from the known
    /// values on the boundary and inside the well supports.
    pub sigma: DVector<f64>,
    /// Set when the Dirichlet solve produced nonpositive `sigma^{1/2}`
    /// values; those are clamped to `1e-6` before squaring.
    pub negative_root: bool,
}

const ROOT_FLOOR: f64 = 1e-6;

/// Solves `lap_h(s) - r1 s = 0` for `s = sigma^{1/2}` on the domain minus
/// the well supports, with Dirichlet data `sqrt(known_sigma)` on the outer
/// boundary and inside the wells, and returns `sigma = s^2`.
pub fn recover_sigma(
    wells: &WellFields,
    r1: &DVector<f64>,
    known_sigma: &DVector<f64>,
) -> Result<SigmaRecovery> {
    let grid = wells.grid();
    if r1.len() != grid.n_nodes() {
        return Err(Error::GridMismatch { expected: grid.n_nodes(), got: r1.len() });
    }
    if known_sigma.len() != grid.n_nodes() {
        return Err(Error::GridMismatch { expected: grid.n_nodes(), got: known_sigma.len() });
    }
    let support = wells.support();
    let dirichlet = |k: usize, l: usize| {
        let idx = grid.node_index(k, l);
        !grid.is_interior(k, l) || support[idx]
    };
    for l in 0..grid.nodes_per_side() {
        for k in 0..grid.nodes_per_side() {
            if dirichlet(k, l) {
                let v = known_sigma[grid.node_index(k, l)];
                if v <= 0.0 {
                    return Err(Error::NonPositiveSigma(v));
                }
            }
        }
    }

    let mut col_of = vec![usize::MAX; grid.n_nodes()];
    let mut unknowns = Vec::new();
    for (k, l) in grid.interior_nodes() {
        let idx = grid.node_index(k, l);
        if !support[idx] {
            col_of[idx] = unknowns.len();
            unknowns.push((k, l));
        }
    }

    let h2 = grid.h() * grid.h();
    let mut trips = Vec::with_capacity(5 * unknowns.len());
    let mut rhs = DVector::zeros(unknowns.len());
    for (row, &(k, l)) in unknowns.iter().enumerate() {
        let idx = grid.node_index(k, l);
        trips.push((row, row, Complex64::new(-4.0 / h2 - r1[idx], 0.0)));
        for (nk, nl) in [(k - 1, l), (k + 1, l), (k, l - 1), (k, l + 1)] {
            let nidx = grid.node_index(nk, nl);
            if dirichlet(nk, nl) {
                rhs[row] -= Complex64::new(known_sigma[nidx].sqrt() / h2, 0.0);
            } else {
                trips.push((row, col_of[nidx], Complex64::new(1.0 / h2, 0.0)));
            }
        }
    }

    let system = SparseSystem::factorize(unknowns.len(), &trips)?;
    let sol = system.solve(&rhs)?;

    let mut negative_root = false;
    let mut sigma = DVector::zeros(grid.n_nodes());
    for l in 0..grid.nodes_per_side() {
        for k in 0..grid.nodes_per_side() {
            let idx = grid.node_index(k, l);
            if dirichlet(k, l) {
                sigma[idx] = known_sigma[idx];
            } else {
                let mut s = sol[col_of[idx]].re;
                if s <= 0.0 {
                    negative_root = true;
                    s = ROOT_FLOOR;
                }
                sigma[idx] = s * s;
            }
        }
    }
    Ok(SigmaRecovery { sigma, negative_root })
}

/// `S = sigma * r2`, everywhere including the well supports.
pub fn recover_storage(sigma: &DVector<f64>, r2: &DVector<f64>) -> DVector<f64> {
    assert_eq!(sigma.len(), r2.len(), "fields share a grid");
    sigma.component_mul(r2)
}

/// Both parameters from a single frequency.
pub struct OneFreqRecovery {
    pub sigma: DVector<f64>,
    pub storage: DVector<f64>,
    pub negative_root: bool,
}

/// Conductivity from `Re Q` via the same Dirichlet solve, then
/// `S = sigma * Im Q / omega`.
pub fn one_freq_recover(
    wells: &WellFields,
    q: &ComplexPotential,
    known_sigma: &DVector<f64>,
) -> Result<OneFreqRecovery> {
    assert!(q.omega != 0.0, "storage is invisible at zero frequency");
    let r1 = q.field.values().map(|z| z.re);
    let recovery = recover_sigma(wells, &r1, known_sigma)?;
    let slope = q.field.values().map(|z| z.im / q.omega);
    let storage = recover_storage(&recovery.sigma, &slope);
    Ok(OneFreqRecovery { sigma: recovery.sigma, storage, negative_root: recovery.negative_root })
}
