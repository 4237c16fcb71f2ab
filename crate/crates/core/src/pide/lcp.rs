//! Tridiagonal linear systems and complementarity problems
//! `min(A u - f, u - g) = 0` with `A` an M-matrix.

use crate::error::{Error, Result};

/// Row `i` reads `lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn row_times(&self, u: &[f64], i: usize) -> f64 {
        let n = self.len();
        let mut v = self.diag[i] * u[i];
        if i > 0 {
            v += self.lower[i] * u[i - 1];
        }
        if i + 1 < n {
            v += self.upper[i] * u[i + 1];
        }
        v
    }

    /// Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / m } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / m;
        }
        let mut u = d;
        for i in (0..n - 1).rev() {
            u[i] -= c[i] * u[i + 1];
        }
        u
    }

    /// Direct solve of the obstacle problem when the contact set is a
    /// left interval (put-type): eliminate the upper diagonal from the
    /// right end, then project while substituting from the left.
    pub fn brennan_schwartz(&self, rhs: &[f64], obstacle: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut b = self.diag.clone();
        let mut f = rhs.to_vec();
        for i in (0..n - 1).rev() {
            let factor = self.upper[i] / b[i + 1];
            b[i] -= factor * self.lower[i + 1];
            f[i] -= factor * f[i + 1];
        }
        let mut u = vec![0.0; n];
        u[0] = (f[0] / b[0]).max(obstacle[0]);
        for i in 1..n {
            u[i] = ((f[i] - self.lower[i] * u[i - 1]) / b[i]).max(obstacle[i]);
        }
        u
    }

    /// Projected SOR from `u`, iterated until the largest update is below `tol`.
    pub fn psor(&self, rhs: &[f64], obstacle: &[f64], u: &mut [f64], omega: f64, tol: f64, max_iter: usize) -> Result<usize> {
        let n = self.len();
        for iter in 1..=max_iter {
            let mut change: f64 = 0.0;
            for i in 0..n {
                let mut off = 0.0;
                if i > 0 {
                    off += self.lower[i] * u[i - 1];
                }
                if i + 1 < n {
                    off += self.upper[i] * u[i + 1];
                }
                let gs = (rhs[i] - off) / self.diag[i];
                let next = (u[i] + omega * (gs - u[i])).max(obstacle[i]);
                change = change.max((next - u[i]).abs());
                u[i] = next;
            }
            if change < tol {
                return Ok(iter);
            }
        }
        Err(Error::Unconverged(format!("PSOR did not reach {tol} in {max_iter} sweeps")))
    }

    /// `max_i |min(A u - f, u - g)_i|`.
    pub fn complementarity_residual(&self, rhs: &[f64], obstacle: &[f64], u: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| (self.row_times(u, i) - rhs[i]).min(u[i] - obstacle[i]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m_matrix(n: usize, a: f64, c: f64, extra: f64) -> Tridiagonal {
        Tridiagonal {
            lower: vec![-a; n],
            diag: vec![1.0 + a + c + extra; n],
            upper: vec![-c; n],
        }
    }

    #[test]
    fn thomas_solves_exactly() {
        let m = m_matrix(6, 1.0, 2.0, 0.5);
        let u: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let f: Vec<f64> = (0..6).map(|i| m.row_times(&u, i)).collect();
        let v = m.solve(&f);
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn brennan_schwartz_agrees_with_psor(a in 0.1f64..5.0, c in 0.1f64..5.0, extra in 0.01f64..1.0, k in 5usize..35) {
            let n = 40;
            let m = m_matrix(n, a, c, extra);
            // decreasing put-like obstacle and a load that favours contact on the left
            let g: Vec<f64> = (0..n).map(|i| (k as f64 - i as f64).max(0.0)).collect();
            let f: Vec<f64> = (0..n).map(|i| 0.5 * extra * g[i] + 0.01 * i as f64).collect();
            let bs = m.brennan_schwartz(&f, &g);
            let mut ps = g.clone();
            m.psor(&f, &g, &mut ps, 1.0, 1e-13, 100_000).unwrap();
            for i in 0..n {
                prop_assert!((bs[i] - ps[i]).abs() < 1e-9, "node {}: {} vs {}", i, bs[i], ps[i]);
            }
            prop_assert!(m.complementarity_residual(&f, &g, &bs) < 1e-10);
            // over-relaxed sweeps leave the exact solution in place
            let mut polished = bs.clone();
            prop_assert_eq!(m.psor(&f, &g, &mut polished, 1.5, 1e-10, 10).unwrap(), 1);
        }
    }
}
