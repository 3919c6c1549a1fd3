//! Classical power-series reversion for scalar maps.
//!
//! Given `f(h) = a_1 h + a_2 h^2 + ...` with `a_1 != 0`, the compositional
//! inverse `g(d) = b_1 d + b_2 d^2 + ...` satisfying `f(g(d)) = d` has
//! coefficients determined triangularly: matching the coefficient of `d^n`
//! in `sum_k a_k g(d)^k = d` gives
//!
//! ```text
//! b_1 = 1 / a_1
//! b_n = -( sum_{k=2}^{n} a_k * [d^n] g(d)^k ) / a_1,   n >= 2,
//! ```
//!
//! where `[d^n] g^k` only involves `b_1 .. b_{n-1}`. This is independent of
//! the multilinear series recursion and serves as its scalar cross-check: for
//! a one-dimensional model both must produce the same coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// First `n_terms` coefficients `b_1 .. b_n` of the compositional inverse of
/// the series with coefficients `a = [a_1, a_2, ...]` (missing entries are
/// treated as zero).
pub fn revert_power_series(a: &[Complex64], n_terms: usize) -> Result<Vec<Complex64>> {
    let a1 = a.first().copied().unwrap_or_default();
    if a1.norm() == 0.0 {
        return Err(Error::ZeroLinearCoefficient);
    }
    let coeff = |k: usize| -> Complex64 {
        // 1-based series index.
        a.get(k - 1).copied().unwrap_or_default()
    };

    let mut b: Vec<Complex64> = Vec::with_capacity(n_terms);
    if n_terms == 0 {
        return Ok(b);
    }
    b.push(Complex64::new(1.0, 0.0) / a1);

    // powers[k] holds the coefficients of g(d)^k up to the current order;
    // index 0 of each row is the d^1 coefficient.
    for n in 2..=n_terms {
        let mut acc = Complex64::default();
        for k in 2..=n {
            acc += coeff(k) * power_coefficient(&b, k, n);
        }
        b.push(-acc / a1);
    }
    Ok(b)
}

/// Coefficient of `d^n` in `g(d)^k` where `g(d) = sum b_j d^j` and only
/// `b_1 .. b_{n-1}` are needed (valid for `k >= 2`, since `g^k` at order `n`
/// never touches `b_n`).
fn power_coefficient(b: &[Complex64], k: usize, n: usize) -> Complex64 {
    // g^k has lowest order k; build up iteratively.
    let mut current = vec![Complex64::default(); n];
    for (j, &bj) in b.iter().enumerate().take(n) {
        current[j] = bj;
    }
    let base = current.clone();
    for _ in 1..k {
        let mut next = vec![Complex64::default(); n];
        for i in 0..n {
            if current[i].norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                // orders are (i+1) and (j+1); product order (i+j+2) <= n.
                if i + j + 2 <= n {
                    next[i + j + 1] += current[i] * base[j];
                }
            }
        }
        current = next;
    }
    current[n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(values: &[f64]) -> Vec<Complex64> {
        values.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    /// `f(h) = h + h^2` inverts to the alternating Catalan numbers.
    #[test]
    fn quadratic_series_gives_signed_catalans() {
        let b = revert_power_series(&real(&[1.0, 1.0]), 6).unwrap();
        let expected = [1.0, -1.0, 2.0, -5.0, 14.0, -42.0];
        for (i, (&got, &want)) in b.iter().zip(expected.iter()).enumerate() {
            assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-13, "b_{} = {got}", i + 1);
        }
    }

    /// Reversion round-trip: composing the series recovers the identity.
    #[test]
    fn composition_is_identity_to_truncation_order() {
        let a = real(&[2.0, -0.7, 0.31, 0.05]);
        let n = 8;
        let b = revert_power_series(&a, n).unwrap();
        // f(g(d)) coefficient by coefficient via the same power helper.
        for order in 1..=n {
            let mut acc = Complex64::default();
            for k in 1..=order {
                let ak = a.get(k - 1).copied().unwrap_or_default();
                acc += ak * power_coefficient(&b, k, order);
            }
            let want = if order == 1 { 1.0 } else { 0.0 };
            assert!((acc.re - want).abs() < 1e-10 && acc.im.abs() < 1e-10, "order {order}: {acc}");
        }
    }

    #[test]
    fn odd_series() {
        // f(h) = h + h^3: inverse starts 1, 0, -1, 0, 3, 0, -12.
        let b = revert_power_series(&real(&[1.0, 0.0, 1.0]), 7).unwrap();
        let expected = [1.0, 0.0, -1.0, 0.0, 3.0, 0.0, -12.0];
        for (got, want) in b.iter().zip(expected.iter()) {
            assert!((got.re - want).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn complex_linear_coefficient() {
        let a = vec![Complex64::new(0.0, 2.0), Complex64::new(1.0, -1.0)];
        let b = revert_power_series(&a, 2).unwrap();
        // b1 = 1/a1 = -i/2; b2 = -a2 b1^2 / a1 = -a2/a1^3.
        let b1 = Complex64::new(1.0, 0.0) / a[0];
        let b2 = -a[1] / (a[0] * a[0] * a[0]);
        assert!((b[0] - b1).norm() < 1e-14);
        assert!((b[1] - b2).norm() < 1e-14);
    }

    #[test]
    fn zero_linear_coefficient_is_rejected() {
        match revert_power_series(&real(&[0.0, 1.0]), 3) {
            Err(Error::ZeroLinearCoefficient) => {}
            other => panic!("expected ZeroLinearCoefficient, got {other:?}"),
        }
    }
}
