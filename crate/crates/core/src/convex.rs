//! Pointwise convex calculus for the energy density
//! `σ(y) = |y| + (μ/p)|y|^p`: the density itself, its Legendre–Fenchel
//! conjugate, both subdifferentials and the proximal map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROX_TOL: f64 = 1e-12;
const PROX_MAX_ITER: usize = 100;

/// Parameters `(μ, p, d)` of the energy density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDensityParams {
    mu: f64,
    p: f64,
    dim: usize,
}

impl EnergyDensityParams {
    pub fn new(mu: f64, p: f64, dim: usize) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        Ok(Self { mu, p, dim })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Conjugate exponent `q = p/(p-1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Same `(μ, p)` acting on gradients of another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.mu, self.p, dim)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("vector has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Value of `∂σ(x)` or `∂σ^#(y)`. Only two shapes ever occur: a single
/// point, or the closed unit ball `{y : |y| <= 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SubdiffValue {
    Singleton(Vec<f64>),
    ClosedUnitBall,
}

impl SubdiffValue {
    /// Euclidean distance from `v` to the set.
    pub fn distance(&self, v: &[f64]) -> f64 {
        match self {
            SubdiffValue::Singleton(s) => norm(&sub(v, s)),
            SubdiffValue::ClosedUnitBall => (norm(v) - 1.0).max(0.0),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.distance(v) <= tol
    }

    pub fn singleton(&self) -> Option<&[f64]> {
        match self {
            SubdiffValue::Singleton(s) => Some(s),
            SubdiffValue::ClosedUnitBall => None,
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| c * x).collect()
}

/// `σ` as a function of `|y|` alone.
pub fn sigma_radial(params: &EnergyDensityParams, t: f64) -> f64 {
    let t = t.abs();
    t + params.mu / params.p * t.powf(params.p)
}

/// `σ^#` as a function of `|y|` alone.
pub fn sigma_conj_radial(params: &EnergyDensityParams, t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        return 0.0;
    }
    let p = params.p;
    (1.0 - 1.0 / p) * params.mu.powf(-1.0 / (p - 1.0)) * (t - 1.0).powf(p / (p - 1.0))
}

/// Signed scalar derivative of `σ^#` along a line through the origin:
/// `sign(t) μ^{-1/(p-1)} (|t|-1)_+^{1/(p-1)}`.
pub fn sigma_conj_grad_scalar(params: &EnergyDensityParams, t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        return 0.0;
    }
    let p = params.p;
    t.signum() * params.mu.powf(-1.0 / (p - 1.0)) * (a - 1.0).powf(1.0 / (p - 1.0))
}

/// Derivative of [`sigma_conj_grad_scalar`]; zero on `|t| <= 1`.
/// For `p > 2` it is unbounded as `|t| -> 1+`.
pub fn sigma_conj_hess_scalar(params: &EnergyDensityParams, t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        return 0.0;
    }
    let p = params.p;
    params.mu.powf(-1.0 / (p - 1.0)) / (p - 1.0) * (a - 1.0).powf((2.0 - p) / (p - 1.0))
}

/// Scalar `σ'(t) = sign(t)(1 + μ|t|^{p-1})` for `t != 0`.
pub fn sigma_grad_scalar(params: &EnergyDensityParams, t: f64) -> f64 {
    t.signum() * (1.0 + params.mu * t.abs().powf(params.p - 1.0))
}

/// `σ(y) = |y| + (μ/p)|y|^p`.
pub fn sigma(params: &EnergyDensityParams, y: &[f64]) -> Result<f64> {
    params.check(y)?;
    Ok(sigma_radial(params, norm(y)))
}

/// Closed form of the conjugate `σ^#(y) = sup_x <y,x> - σ(x)`.
pub fn sigma_conj(params: &EnergyDensityParams, y: &[f64]) -> Result<f64> {
    params.check(y)?;
    Ok(sigma_conj_radial(params, norm(y)))
}

/// `∂σ(x)`: the gradient `x/|x| + μ|x|^{p-2}x` away from the origin, the
/// closed unit ball at it.
pub fn subdiff_sigma(params: &EnergyDensityParams, x: &[f64]) -> Result<SubdiffValue> {
    params.check(x)?;
    let n = norm(x);
    if n == 0.0 {
        return Ok(SubdiffValue::ClosedUnitBall);
    }
    let c = 1.0 / n + params.mu * n.powf(params.p - 2.0);
    Ok(SubdiffValue::Singleton(scaled(x, c)))
}

/// `∂σ^#(y)`; always a single point.
pub fn subdiff_sigma_conj(params: &EnergyDensityParams, y: &[f64]) -> Result<SubdiffValue> {
    params.check(y)?;
    let n = norm(y);
    if n <= 1.0 {
        return Ok(SubdiffValue::Singleton(vec![0.0; y.len()]));
    }
    let c = sigma_conj_grad_scalar(params, n) / n;
    Ok(SubdiffValue::Singleton(scaled(y, c)))
}

/// Scalar part of the proximal map: for `a = |z| > λ` returns the `t > 0`
/// solving `t + λμ t^{p-1} = a - λ`.
pub fn prox_radial(params: &EnergyDensityParams, lambda: f64, a: f64) -> Result<f64> {
    if a <= lambda {
        return Ok(0.0);
    }
    let (mu, p) = (params.mu, params.p);
    let rhs = a - lambda;
    if (p - 2.0).abs() < f64::EPSILON {
        return Ok(rhs / (1.0 + lambda * mu));
    }
    let phi = |t: f64| t + lambda * mu * t.powf(p - 1.0) - rhs;
    let dphi = |t: f64| 1.0 + lambda * mu * (p - 1.0) * t.powf(p - 2.0);

    // phi is increasing with phi(0) < 0 <= phi(rhs).
    let (mut lo, mut hi) = (0.0, rhs);
    let mut t = rhs / (1.0 + lambda * mu * rhs.powf(p - 2.0)).max(1.0);
    for _ in 0..PROX_MAX_ITER {
        let f = phi(t);
        if f == 0.0 {
            return Ok(t);
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - f / dphi(t);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= PROX_TOL * t.max(f64::MIN_POSITIVE) || hi - lo <= PROX_TOL * hi {
            for _ in 0..3 {
                let n = t - phi(t) / dphi(t);
                if n > 0.0 && n.is_finite() && phi(n).abs() < phi(t).abs() {
                    t = n;
                }
            }
            return Ok(t);
        }
    }
    Err(Error::SolverDiverged {
        what: "prox_sigma root-find",
        iterations: PROX_MAX_ITER,
        residual: phi(t).abs(),
    })
}

/// Proximal map `argmin_w λσ(w) + |w - z|²/2`.
pub fn prox_sigma(params: &EnergyDensityParams, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
    params.check(z)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let a = norm(z);
    let t = prox_radial(params, lambda, a)?;
    if t == 0.0 {
        return Ok(vec![0.0; z.len()]);
    }
    Ok(scaled(z, t / a))
}

/// Result of a grid maximisation of `<y,x> - σ(x)` over the ball `|x| <= radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceConjugate {
    pub value: f64,
    pub maximizer: Vec<f64>,
    /// The best grid point lies within one coarse cell of the ball's
    /// boundary, so the supremum may lie outside the searched region.
    pub boundary_hit: bool,
    /// Best value after each refinement level; nondecreasing.
    pub history: Vec<f64>,
}

/// Grid oracle for `σ^#`: a coarse lattice scan of the ball followed by
/// `refinement` levels of local rescans, each shrinking the lattice
/// spacing by four around the incumbent.
pub fn sigma_conj_bruteforce(
    params: &EnergyDensityParams,
    y: &[f64],
    radius: f64,
    refinement: usize,
) -> Result<BruteForceConjugate> {
    params.check(y)?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let d = y.len();
    let objective = |x: &[f64]| dot(y, x) - sigma_radial(params, norm(x));

    const COARSE_HALF: i64 = 10;
    const LOCAL_HALF: i64 = 8;
    const SHRINK: f64 = 4.0;

    let coarse = radius / COARSE_HALF as f64;
    let mut best_x = vec![0.0; d];
    let mut best = objective(&best_x);
    scan_lattice(&vec![0.0; d], coarse, COARSE_HALF, radius, &objective, &mut best_x, &mut best);
    let boundary_hit = norm(&best_x) > radius - coarse;

    let mut history = vec![best];
    let mut spacing = coarse;
    for _ in 0..refinement {
        spacing /= SHRINK;
        let center = best_x.clone();
        scan_lattice(&center, spacing, LOCAL_HALF, radius, &objective, &mut best_x, &mut best);
        history.push(best);
    }
    Ok(BruteForceConjugate { value: best, maximizer: best_x, boundary_hit, history })
}

fn scan_lattice(
    center: &[f64],
    spacing: f64,
    half: i64,
    radius: f64,
    objective: &impl Fn(&[f64]) -> f64,
    best_x: &mut Vec<f64>,
    best: &mut f64,
) {
    let d = center.len();
    let side = 2 * half + 1;
    let total = side.pow(d as u32);
    let mut x = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for (k, xk) in x.iter_mut().enumerate() {
            let offset = rem % side - half;
            rem /= side;
            *xk = center[k] + offset as f64 * spacing;
        }
        if norm(&x) > radius {
            continue;
        }
        let v = objective(&x);
        if v > *best {
            *best = v;
            best_x.copy_from_slice(&x);
        }
    }
}
