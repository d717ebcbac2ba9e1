//! Quintic B-spline interpolation with not-a-knot end conditions. Used to
//! give sampled radial profiles the four continuous derivatives that the
//! canonical-restriction formulas need.

use crate::error::{Error, Result};

const DEGREE: usize = 5;

#[derive(Clone, Debug)]
struct BSpline {
    knots: Vec<f64>,
    coeffs: Vec<f64>,
    degree: usize,
}

impl BSpline {
    fn interval(&self, x: f64) -> usize {
        let n = self.coeffs.len();
        let k = self.degree;
        // largest mu in [k, n-1] with knots[mu] <= x
        let mut mu = k;
        while mu + 1 < n && self.knots[mu + 1] <= x {
            mu += 1;
        }
        mu
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.degree;
        if k == 0 {
            return self.coeffs[self.interval(x)];
        }
        let mu = self.interval(x);
        let t = &self.knots;
        let mut d: Vec<f64> = (0..=k).map(|j| self.coeffs[j + mu - k]).collect();
        for r in 1..=k {
            for j in (r..=k).rev() {
                let left = t[j + mu - k];
                let right = t[j + 1 + mu - r];
                let alpha = (x - left) / (right - left);
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
            }
        }
        d[k]
    }

    fn derivative(&self) -> BSpline {
        let k = self.degree;
        let n = self.coeffs.len();
        let t = &self.knots;
        let coeffs = (0..n - 1)
            .map(|j| k as f64 * (self.coeffs[j + 1] - self.coeffs[j]) / (t[j + k + 1] - t[j + 1]))
            .collect();
        BSpline { knots: t[1..t.len() - 1].to_vec(), coeffs, degree: k - 1 }
    }
}

/// Interpolating quintic spline through `(x_i, y_i)`, `C⁴` on the sample range.
#[derive(Clone, Debug)]
pub struct QuinticSpline {
    /// `derivs[k]` is the `k`-th derivative spline, `k = 0..=4`.
    derivs: Vec<BSpline>,
    lo: f64,
    hi: f64,
}

impl QuinticSpline {
    pub fn interpolate(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if n < DEGREE + 1 {
            return Err(Error::InvalidProfile(format!(
                "quintic interpolation needs at least {} samples, got {n}",
                DEGREE + 1
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("sample abscissae must be finite and strictly increasing".into()));
        }
        let mut knots = vec![x[0]; DEGREE + 1];
        knots.extend_from_slice(&x[3..n - 3]);
        knots.extend(std::iter::repeat(x[n - 1]).take(DEGREE + 1));

        // dense collocation matrix; rows have at most six nonzeros
        let mut a = vec![vec![0.0; n]; n];
        let mut unit = BSpline { knots: knots.clone(), coeffs: vec![0.0; n], degree: DEGREE };
        for (i, &xi) in x.iter().enumerate() {
            let mu = unit.interval(xi);
            for j in mu - DEGREE..=mu {
                unit.coeffs[j] = 1.0;
                a[i][j] = unit.eval(xi);
                unit.coeffs[j] = 0.0;
            }
        }
        let coeffs = solve_dense(a, y.to_vec())?;
        let mut derivs = vec![BSpline { knots, coeffs, degree: DEGREE }];
        for _ in 0..4 {
            let d = derivs.last().unwrap().derivative();
            derivs.push(d);
        }
        Ok(Self { derivs, lo: x[0], hi: x[n - 1] })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `order`-th derivative (0..=4) at `x`; outside the sample range the
    /// end polynomial pieces are extended.
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        self.derivs[order].eval(x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidProfile("singular spline collocation system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            if m == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}
