//! Uniform node-centered grids on the unit square.
//!
//! A grid with `n` cells per side has `(n + 1)^2` nodes at spacing `h = 1/n`,
//! node `(k, l)` sitting at `(k h, l h)`. Grid functions are flat vectors in
//! row-major node order (`l` outer, `k` inner). Dirichlet problems eliminate
//! the boundary ring and work on the `(n - 1)^2` interior nodes.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform grid on `[0, 1]^2` with `n_cells` cells per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid2D {
    n_cells: usize,
}

impl Grid2D {
    /// A grid needs at least two cells per side to have an interior.
    pub fn new(n_cells: usize) -> Self {
        assert!(n_cells >= 2, "grid needs at least 2 cells per side");
        Self { n_cells }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Mesh spacing `h = 1 / n_cells`.
    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Nodes per side, `n_cells + 1`.
    pub fn nodes_per_side(&self) -> usize {
        self.n_cells + 1
    }

    /// Total node count `(n_cells + 1)^2`.
    pub fn n_nodes(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    /// Interior node count `(n_cells - 1)^2`.
    pub fn n_interior(&self) -> usize {
        (self.n_cells - 1) * (self.n_cells - 1)
    }

    /// Flat index of node `(k, l)` in row-major order.
    pub fn node_index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k <= self.n_cells && l <= self.n_cells);
        l * self.nodes_per_side() + k
    }

    /// Inverse of [`node_index`](Self::node_index).
    pub fn node_kl(&self, index: usize) -> (usize, usize) {
        let s = self.nodes_per_side();
        (index % s, index / s)
    }

    /// Physical coordinates of node `(k, l)`.
    pub fn node_coords(&self, k: usize, l: usize) -> (f64, f64) {
        (k as f64 * self.h(), l as f64 * self.h())
    }

    pub fn is_interior(&self, k: usize, l: usize) -> bool {
        k >= 1 && k < self.n_cells && l >= 1 && l < self.n_cells
    }

    /// Flat index of interior node `(k, l)` in the boundary-eliminated
    /// ordering used by the sparse operators.
    pub fn interior_index(&self, k: usize, l: usize) -> usize {
        debug_assert!(self.is_interior(k, l));
        (l - 1) * (self.n_cells - 1) + (k - 1)
    }

    /// All interior nodes in row-major order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_cells;
        (1..n).flat_map(move |l| (1..n).map(move |k| (k, l)))
    }

    /// Interior nodes at distance `>= eps` from the boundary of the square.
    ///
    /// The set is always a centered index rectangle. `eps = 0` gives the full
    /// interior; `eps` close to `1/2` empties the region (the constructor
    /// rejects that).
    pub fn margin_region(&self, eps: f64) -> NodeRegion {
        assert!((0.0..0.5).contains(&eps), "margin must lie in [0, 1/2)");
        // Smallest k with k*h >= eps, snapped down when eps sits on a node.
        let lo = ((eps / self.h() - 1e-9).ceil().max(1.0)) as usize;
        let hi = self.n_cells - lo;
        assert!(lo <= hi, "margin {eps} leaves no interior nodes");
        NodeRegion { k0: lo, k1: hi, l0: lo, l1: hi }
    }

    /// The full interior as a region.
    pub fn interior_region(&self) -> NodeRegion {
        NodeRegion { k0: 1, k1: self.n_cells - 1, l0: 1, l1: self.n_cells - 1 }
    }

    /// Trapezoid quadrature weight of node `(k, l)` for integrals over the
    /// whole square: `h^2` times `1/2` per coordinate pinned to the boundary.
    pub fn quad_weight(&self, k: usize, l: usize) -> f64 {
        let n = self.n_cells;
        let cx = if k == 0 || k == n { 0.5 } else { 1.0 };
        let cy = if l == 0 || l == n { 0.5 } else { 1.0 };
        self.h() * self.h() * cx * cy
    }
}

/// A rectangle of node indices, both ends inclusive.
///
/// Used for the retrieval subdomain (the margin where perturbations are
/// supported) and for quadrature over subsquares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRegion {
    pub k0: usize,
    pub k1: usize,
    pub l0: usize,
    pub l1: usize,
}

impl NodeRegion {
    pub fn contains(&self, k: usize, l: usize) -> bool {
        k >= self.k0 && k <= self.k1 && l >= self.l0 && l <= self.l1
    }

    pub fn node_count(&self) -> usize {
        (self.k1 - self.k0 + 1) * (self.l1 - self.l0 + 1)
    }

    /// Nodes in row-major order (`l` outer).
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (k0, k1) = (self.k0, self.k1);
        (self.l0..=self.l1).flat_map(move |l| (k0..=k1).map(move |k| (k, l)))
    }

    /// Position of `(k, l)` in [`nodes`](Self::nodes) order.
    pub fn local_index(&self, k: usize, l: usize) -> usize {
        debug_assert!(self.contains(k, l));
        (l - self.l0) * (self.k1 - self.k0 + 1) + (k - self.k0)
    }

    /// Trapezoid weight of `(k, l)` for integrals over this subsquare
    /// (zero outside it).
    pub fn quad_weight(&self, grid: Grid2D, k: usize, l: usize) -> f64 {
        if !self.contains(k, l) {
            return 0.0;
        }
        let cx = if k == self.k0 || k == self.k1 { 0.5 } else { 1.0 };
        let cy = if l == self.l0 || l == self.l1 { 0.5 } else { 1.0 };
        grid.h() * grid.h() * cx * cy
    }
}

fn check_len(grid: Grid2D, v: &DVector<Complex64>) -> Result<()> {
    if v.len() != grid.n_nodes() {
        return Err(Error::GridMismatch { expected: grid.n_nodes(), got: v.len() });
    }
    Ok(())
}

/// Trapezoid-rule approximation of the bilinear pairing `integral of f * g`
/// over the unit square. No conjugation: the pairing is symmetric and
/// bilinear in both arguments.
pub fn trapezoid_integral(grid: Grid2D, f: &DVector<Complex64>, g: &DVector<Complex64>) -> Result<Complex64> {
    check_len(grid, f)?;
    check_len(grid, g)?;
    let s = grid.nodes_per_side();
    let mut acc = Complex64::default();
    for l in 0..s {
        for k in 0..s {
            let i = grid.node_index(k, l);
            acc += grid.quad_weight(k, l) * f[i] * g[i];
        }
    }
    Ok(acc)
}

/// Trapezoid-rule `L^2` norm of a grid function over the unit square.
pub fn trapezoid_l2_norm(grid: Grid2D, f: &DVector<Complex64>) -> Result<f64> {
    check_len(grid, f)?;
    let s = grid.nodes_per_side();
    let mut acc = 0.0;
    for l in 0..s {
        for k in 0..s {
            let i = grid.node_index(k, l);
            acc += grid.quad_weight(k, l) * f[i].norm_sqr();
        }
    }
    Ok(acc.sqrt())
}

/// Pointwise restriction of a fine-grid function to a coarse grid by
/// injection at coincident nodes.
pub fn restrict_fine_to_coarse(
    fine: Grid2D,
    coarse: Grid2D,
    values: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    check_len(fine, values)?;
    if fine.n_cells() % coarse.n_cells() != 0 {
        return Err(Error::IncompatibleGrids { fine: fine.n_cells(), coarse: coarse.n_cells() });
    }
    let ratio = fine.n_cells() / coarse.n_cells();
    let s = coarse.nodes_per_side();
    let mut out = DVector::zeros(coarse.n_nodes());
    for l in 0..s {
        for k in 0..s {
            out[coarse.node_index(k, l)] = values[fine.node_index(k * ratio, l * ratio)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cvec(vals: Vec<f64>) -> DVector<Complex64> {
        DVector::from_iterator(vals.len(), vals.into_iter().map(|x| Complex64::new(x, 0.0)))
    }

    #[test]
    fn constant_integrates_exactly() {
        for n in [2, 5, 16] {
            let grid = Grid2D::new(n);
            let ones = cvec(vec![1.0; grid.n_nodes()]);
            let val = trapezoid_integral(grid, &ones, &ones).unwrap();
            assert!((val.re - 1.0).abs() < 1e-14, "n={n}: {val}");
            assert!(val.im.abs() < 1e-15);
        }
    }

    #[test]
    fn integral_is_symmetric_and_bilinear() {
        use rand::{Rng, SeedableRng};
        let grid = Grid2D::new(7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rand_fn = |rng: &mut rand_chacha::ChaCha8Rng| {
            DVector::from_iterator(
                grid.n_nodes(),
                (0..grid.n_nodes()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
            )
        };
        let f = rand_fn(&mut rng);
        let g = rand_fn(&mut rng);
        let p = rand_fn(&mut rng);
        let c = Complex64::new(0.3, -1.2);

        let fg = trapezoid_integral(grid, &f, &g).unwrap();
        let gf = trapezoid_integral(grid, &g, &f).unwrap();
        assert!((fg - gf).norm() < 1e-14);

        let lhs = trapezoid_integral(grid, &(&f * c + &p), &g).unwrap();
        let rhs = c * fg + trapezoid_integral(grid, &p, &g).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn margin_region_is_exactly_the_far_interior() {
        let grid = Grid2D::new(40);
        let region = grid.margin_region(0.1);
        // Every interior node at distance >= 0.1 from the boundary, nothing else.
        for l in 0..=40 {
            for k in 0..=40 {
                let (x, y) = grid.node_coords(k, l);
                let dist = x.min(1.0 - x).min(y).min(1.0 - y);
                let inside = grid.is_interior(k, l) && dist >= 0.1 - 1e-12;
                assert_eq!(region.contains(k, l), inside, "node ({k},{l})");
            }
        }
        assert_eq!(region.node_count(), 33 * 33);
    }

    #[test]
    fn margin_zero_is_the_interior() {
        let grid = Grid2D::new(9);
        assert_eq!(grid.margin_region(0.0), grid.interior_region());
    }

    #[test]
    fn restriction_picks_coincident_nodes() {
        let fine = Grid2D::new(8);
        let coarse = Grid2D::new(4);
        let vals = DVector::from_fn(fine.n_nodes(), |i, _| {
            let (k, l) = fine.node_kl(i);
            Complex64::new(k as f64, l as f64)
        });
        let r = restrict_fine_to_coarse(fine, coarse, &vals).unwrap();
        for l in 0..=4 {
            for k in 0..=4 {
                let v = r[coarse.node_index(k, l)];
                assert_eq!((v.re, v.im), ((2 * k) as f64, (2 * l) as f64));
            }
        }
    }

    #[test]
    fn restriction_rejects_non_multiple() {
        let fine = Grid2D::new(10);
        let coarse = Grid2D::new(4);
        let vals = DVector::zeros(fine.n_nodes());
        match restrict_fine_to_coarse(fine, coarse, &vals) {
            Err(Error::IncompatibleGrids { fine: 10, coarse: 4 }) => {}
            other => panic!("expected IncompatibleGrids, got {other:?}"),
        }
    }

    #[test]
    fn region_quadrature_sums_to_subsquare_area() {
        let grid = Grid2D::new(20);
        let region = grid.margin_region(0.25);
        let area: f64 = region.nodes().map(|(k, l)| region.quad_weight(grid, k, l)).sum();
        assert!((area - 0.25).abs() < 1e-14, "area {area}");
    }
}
