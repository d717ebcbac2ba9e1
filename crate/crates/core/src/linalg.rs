//! Small direct solvers: Thomas algorithm and an envelope (skyline)
//! Cholesky factorisation, which covers banded and cyclic-banded SPD
//! systems without storing the zeros outside each row's profile.

use crate::error::{Error, Result};

/// Solves a tridiagonal system. `lower[i]` couples row `i+1` to column `i`,
/// `upper[i]` couples row `i` to column `i+1`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() + 1 == n.max(1) && upper.len() + 1 == n.max(1) && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Lower triangle of a symmetric matrix stored row by row from each row's
/// first structurally nonzero column up to the diagonal.
#[derive(Clone, Debug)]
pub struct EnvelopeMatrix {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl EnvelopeMatrix {
    pub fn new(first: Vec<usize>) -> Self {
        let rows = first.iter().enumerate().map(|(i, &f)| {
            assert!(f <= i, "row {i} profile starts after the diagonal");
            vec![0.0; i - f + 1]
        });
        let rows = rows.collect();
        Self { first, rows }
    }

    /// Profile of a symmetric sparsity pattern given as `(i, j)` pairs.
    pub fn from_pattern(n: usize, pattern: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j) in pattern {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            first[hi] = first[hi].min(lo);
        }
        Self::new(first)
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let f = self.first[hi];
        assert!(lo >= f, "entry ({hi},{lo}) outside the envelope");
        self.rows[hi][lo - f] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let f = self.first[hi];
        if lo < f {
            0.0
        } else {
            self.rows[hi][lo - f]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let f = self.first[i];
            for (k, a) in self.rows[i].iter().enumerate() {
                let j = f + k;
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky factorisation `A = L Lᵀ`; fill-in stays inside the envelope.
    pub fn cholesky(mut self) -> Result<EnvelopeCholesky> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            for j in fi..=i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let mut s = self.rows[i][j - fi];
                for k in start..j {
                    s -= self.rows[i][k - fi] * self.rows[j][k - fj];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    self.rows[i][i - fi] = s.sqrt();
                } else {
                    self.rows[i][j - fi] = s / self.rows[j][j - fj];
                }
            }
        }
        Ok(EnvelopeCholesky { factor: self })
    }
}

#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    factor: EnvelopeMatrix,
}

impl EnvelopeCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let EnvelopeMatrix { first, rows } = &self.factor;
        let n = first.len();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let f = first[i];
            let mut s = y[i];
            for k in f..i {
                s -= rows[i][k - f] * y[k];
            }
            y[i] = s / rows[i][i - f];
        }
        for i in (0..n).rev() {
            let f = first[i];
            y[i] /= rows[i][i - f];
            let xi = y[i];
            for k in f..i {
                y[k] -= rows[i][k - f] * xi;
            }
        }
        y
    }
}
