//! Best uniform polynomial approximation by Remez exchange.
//!
//! Used as a reference value in tests: the error of an interpolant must sit
//! between `E_d(f)` and `(1 + lambda) E_d(f)`.

use crate::cheb::golden_max;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MinimaxError {
    #[error("interval [{a}, {b}] is empty or not finite")]
    EmptyInterval { a: f64, b: f64 },
    #[error("f is not finite at t = {0}")]
    NonFinite(f64),
    #[error("exchange did not converge after {iterations} iterations; E lies in [{lower}, {upper}]")]
    NoConvergence { iterations: usize, lower: f64, upper: f64 },
    #[error("singular reference system")]
    Singular,
}

/// Result of [`minimax_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimax {
    /// Max deviation of the final polynomial, an upper bound for `E_d`.
    pub error: f64,
    /// Levelled error `|E|` of the final reference, a lower bound for `E_d`.
    pub lower: f64,
    /// Chebyshev coefficients on the interval mapped to `[-1, 1]`.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

const GRID: usize = 2049;
const MAX_ITER: usize = 60;

fn chebyshev_sum(coefs: &[f64], x: f64) -> f64 {
    // Clenshaw
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coefs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + coefs[0]
}

/// Best approximation error of `f` by polynomials of degree `<= d` on `[a, b]`,
/// with relative accuracy `tol` between the bracket ends.
pub fn minimax_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64, d: usize, tol: f64) -> Result<Minimax, MinimaxError> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(MinimaxError::EmptyInterval { a, b });
    }
    let to_t = |x: f64| 0.5 * (a + b) + 0.5 * (b - a) * x;
    let g = |x: f64| f(to_t(x));
    let n = d + 2;

    let grid: Vec<f64> = (0..GRID).map(|i| -(PI * i as f64 / (GRID - 1) as f64).cos()).collect();
    let grid_vals: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    if let Some(i) = grid_vals.iter().position(|v| !v.is_finite()) {
        return Err(MinimaxError::NonFinite(to_t(grid[i])));
    }
    let scale = grid_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut reference: Vec<f64> = (0..n).map(|i| -(PI * i as f64 / (n - 1) as f64).cos()).collect();
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut coefs = vec![0.0; d + 1];
    for iter in 1..=MAX_ITER {
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (i, &x) in reference.iter().enumerate() {
            let (mut t0, mut t1) = (1.0, x);
            for j in 0..=d {
                m[(i, j)] = if j == 0 { 1.0 } else { t1 };
                if j >= 1 {
                    let t2 = 2.0 * x * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                }
            }
            m[(i, d + 1)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            rhs[i] = g(x);
        }
        let sol = m.lu().solve(&rhs).ok_or(MinimaxError::Singular)?;
        coefs = sol.iter().take(d + 1).copied().collect();
        let levelled = sol[d + 1].abs();

        let err = |x: f64| g(x) - chebyshev_sum(&coefs, x);
        let errs: Vec<f64> = grid.iter().zip(&grid_vals).map(|(&x, &v)| v - chebyshev_sum(&coefs, x)).collect();

        // One extremum per sign run, refined between the neighbouring grid points.
        let mut extrema: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < GRID {
            let sign = errs[i] >= 0.0;
            let mut best = i;
            let mut j = i;
            while j < GRID && (errs[j] >= 0.0) == sign {
                if errs[j].abs() > errs[best].abs() {
                    best = j;
                }
                j += 1;
            }
            let lo = grid[best.saturating_sub(1)];
            let hi = grid[(best + 1).min(GRID - 1)];
            let s = if sign { 1.0 } else { -1.0 };
            let (x, v) = golden_max(|x| s * err(x), lo, hi, 1e-14);
            let (x, v) = if v >= errs[best].abs() { (x, s * v) } else { (grid[best], errs[best]) };
            extrema.push((x, v));
            i = j;
        }
        let max_dev = extrema.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        lower = lower.max(levelled);
        upper = upper.min(max_dev);

        if max_dev <= 1e-14 * scale.max(1e-300) {
            return Ok(Minimax { error: max_dev, lower: max_dev, coefficients: coefs, iterations: iter });
        }
        if max_dev - levelled <= tol * max_dev {
            return Ok(Minimax { error: max_dev, lower: levelled, coefficients: coefs, iterations: iter });
        }
        if extrema.len() < n {
            // Fewer alternations than needed: keep the reference but swap in the
            // global maximum.
            let (gx, _) =
                extrema.iter().copied().fold((0.0, 0.0f64), |acc: (f64, f64), e| if e.1.abs() > acc.1.abs() { e } else { acc });
            let pos = reference.partition_point(|&r| r < gx).min(n - 1);
            reference[pos] = gx;
            reference.sort_by(f64::total_cmp);
            continue;
        }
        let global = extrema.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
        while extrema.len() > n {
            let first = extrema[0].1.abs();
            let last = extrema[extrema.len() - 1].1.abs();
            if (first <= last && first < global) || last >= global {
                extrema.remove(0);
            } else {
                extrema.pop();
            }
        }
        reference = extrema.iter().map(|e| e.0).collect();
    }
    Err(MinimaxError::NoConvergence { iterations: MAX_ITER, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_is_exact() {
        let m = minimax_oracle(|_| 3.0, -1.0, 2.0, 2, 1e-9).unwrap();
        assert!(m.error < 1e-13);
    }

    #[test]
    fn monomial_closed_form() {
        for s in 2..=6 {
            let m = minimax_oracle(|t| t.powi(s), -1.0, 1.0, s as usize - 1, 1e-10).unwrap();
            assert_abs_diff_eq!(m.error, 2f64.powi(1 - s), epsilon = 1e-9);
        }
    }

    #[test]
    fn chebyshev_polynomial_cannot_be_improved() {
        let t3 = |t: f64| 4.0 * t * t * t - 3.0 * t;
        let m = minimax_oracle(t3, -1.0, 1.0, 2, 1e-10).unwrap();
        assert_abs_diff_eq!(m.error, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn smooth_function_bracket() {
        let m = minimax_oracle(f64::exp, 0.0, 1.0, 3, 1e-9).unwrap();
        assert!(m.lower <= m.error);
        assert!((m.error - m.lower) <= 1e-9 * m.error);
        // leading-term estimate e^(1/2) / (4! 2^3 2^4) ~ 5.4e-4
        assert!(m.error > 4e-4 && m.error < 7e-4);
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(matches!(minimax_oracle(|t| t, 1.0, 1.0, 1, 1e-9), Err(MinimaxError::EmptyInterval { .. })));
    }
}
