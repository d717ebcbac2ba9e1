//! Canonical restriction (minimal-norm element of the Dirichlet
//! subdifferential) for a spherically symmetric surface `f(x) = h(|x|)`
//! that is flat on the ball `|x| < r0` and strictly decreasing on
//! `r0 < |x| < r`.
//!
//! With `H(s) = -1 + μ|h'(s)|^{p-2}h'(s)` the facet field is
//! `g(x) = η(|x|) x/|x|`, `η(s) = C1 s + C2 s³`, fixed by continuity of the
//! normal trace and of the divergence at `|x| = r0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::convex::EnergyDensityParams;
use crate::error::{Error, Result};
use crate::fd;
use crate::poly::Polynomial;
use crate::spline::QuinticSpline;

/// Slack on the interval test `H'(r0) ∈ [-9/r0, 0]`.
pub const INTERVAL_SLACK: f64 = 1e-12;
/// Slack on `max |η| <= 1`.
pub const FACET_BOUND_SLACK: f64 = 1e-10;
/// Smallest admissible facet radius relative to the domain radius.
pub const MIN_FACET_RATIO: f64 = 1e-6;

/// A real function of the radial variable with derivatives up to order 4.
pub trait RadialFunction {
    fn derivative(&self, order: usize, s: f64) -> f64;

    fn value(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }
}

/// `s^a`.
#[derive(Clone, Copy, Debug)]
pub struct Power(pub f64);

impl RadialFunction for Power {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        let a = self.0;
        let coeff: f64 = (0..order).map(|k| a - k as f64).product();
        if coeff == 0.0 {
            0.0
        } else {
            coeff * s.powf(a - order as f64)
        }
    }
}

/// `s log s`.
#[derive(Clone, Copy, Debug)]
pub struct SLogS;

impl RadialFunction for SLogS {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        match order {
            0 => s * s.ln(),
            1 => s.ln() + 1.0,
            2 => 1.0 / s,
            3 => -1.0 / (s * s),
            4 => 2.0 / (s * s * s),
            _ => panic!("derivative order {order} not supported"),
        }
    }
}

/// Derivatives of an arbitrary closure by Richardson-extrapolated central
/// differences with step `step * max(1, |s|)`.
pub struct Numeric<F> {
    pub f: F,
    pub step: f64,
}

impl<F: Fn(f64) -> f64> RadialFunction for Numeric<F> {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        let h = self.step * s.abs().max(1.0);
        fd::richardson(&self.f, s, order, h)
    }
}

/// Pointwise sum of two radial functions.
pub struct Sum<A, B>(pub A, pub B);

impl<A: RadialFunction, B: RadialFunction> RadialFunction for Sum<A, B> {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        self.0.derivative(order, s) + self.1.derivative(order, s)
    }
}

/// `c · f`.
pub struct Scaled<A>(pub f64, pub A);

impl<A: RadialFunction> RadialFunction for Scaled<A> {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        self.0 * self.1.derivative(order, s)
    }
}

fn ode_terms(dim: usize, eta: &impl RadialFunction, s: f64) -> [f64; 5] {
    let d = dim as f64;
    [
        s.powi(4) * eta.derivative(4, s),
        2.0 * (d - 1.0) * s.powi(3) * eta.derivative(3, s),
        (d - 1.0) * (d - 5.0) * s * s * eta.derivative(2, s),
        -3.0 * (d - 1.0) * (d - 3.0) * s * eta.derivative(1, s),
        3.0 * (d - 1.0) * (d - 3.0) * eta.value(s),
    ]
}

/// Left-hand side of the radial Euler–Lagrange equation for
/// `∇Δ div(η(|x|) x/|x|) = 0`:
/// `s⁴η⁗ + 2(d-1)s³η‴ + (d-1)(d-5)s²η″ - 3(d-1)(d-3)sη′ + 3(d-1)(d-3)η`.
pub fn radial_ode_residual(dim: usize, eta: &impl RadialFunction, s: f64) -> f64 {
    ode_terms(dim, eta, s).iter().sum()
}

/// Sum of the absolute values of the five ODE terms; the natural scale for
/// relative residuals.
pub fn radial_ode_scale(dim: usize, eta: &impl RadialFunction, s: f64) -> f64 {
    ode_terms(dim, eta, s).iter().map(|t| t.abs()).sum()
}

/// The four-function general solution basis of the radial ODE:
/// `s`, `s³`, `s^{-(d-1)}` and `s log s` (d = 2) or `s^{-(d-3)}` (d ≠ 2).
pub fn ode_solution_basis(dim: usize) -> Vec<(String, Box<dyn Fn(usize, f64) -> f64>)> {
    let d = dim as f64;
    let mut basis: Vec<(String, Box<dyn Fn(usize, f64) -> f64>)> = vec![
        ("s".into(), Box::new(|k, s| Power(1.0).derivative(k, s))),
        ("s^3".into(), Box::new(|k, s| Power(3.0).derivative(k, s))),
        (format!("s^-{}", dim - 1), Box::new(move |k, s| Power(1.0 - d).derivative(k, s))),
    ];
    if dim == 2 {
        basis.push(("s log s".into(), Box::new(|k, s| SLogS.derivative(k, s))));
    } else {
        basis.push((format!("s^{}", 3 - dim as i64), Box::new(move |k, s| Power(3.0 - d).derivative(k, s))));
    }
    basis
}

impl<F: Fn(usize, f64) -> f64 + ?Sized> RadialFunction for Box<F> {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        (**self)(order, s)
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // ω_d = π^{d/2} / Γ(d/2 + 1), by the recursion ω_d = 2π/d · ω_{d-2}
    match dim {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / dim as f64 * unit_ball_volume(dim - 2),
    }
}

/// Area of the sphere of radius `radius` in `R^d`.
pub fn sphere_area(dim: usize, radius: f64) -> f64 {
    dim as f64 * unit_ball_volume(dim) * radius.powi(dim as i32 - 1)
}

#[derive(Clone, Debug)]
enum Shape {
    /// `h'` is a polynomial on `[r0, r]`; `h(s) = P(s) - P(r)` with `P' = h'`.
    Polynomial { slope: Polynomial, antiderivative: Polynomial, anti_at_r: f64 },
    /// `h` interpolated by a quintic spline on `[r0, r]`.
    Spline(QuinticSpline),
}

/// Spherically symmetric surface profile `h` on `[0, r]`, flat on `[0, r0]`.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    r0: f64,
    r: f64,
    params: EnergyDensityParams,
    shape: Shape,
}

impl RadialProfile {
    /// Profile whose bulk slope `h'` is the given polynomial on `[r0, r]`.
    pub fn from_slope_polynomial(r0: f64, r: f64, params: EnergyDensityParams, slope: Polynomial) -> Result<Self> {
        check_radii(r0, r)?;
        let antiderivative = slope.antiderivative();
        let anti_at_r = antiderivative.eval(r);
        let profile = Self { r0, r, params, shape: Shape::Polynomial { slope, antiderivative, anti_at_r } };
        profile.validate()?;
        Ok(profile)
    }

    /// Profile from samples `(s, h(s))`. Samples must start at `r0` and end
    /// at `r`; points with `s < r0` are ignored (the facet is flat).
    pub fn from_samples(r0: f64, r: f64, params: EnergyDensityParams, samples: &[(f64, f64)]) -> Result<Self> {
        check_radii(r0, r)?;
        let tol = 1e-9 * r;
        let bulk: Vec<(f64, f64)> = samples.iter().copied().filter(|&(s, _)| s >= r0 - tol).collect();
        let (first, last) = match (bulk.first(), bulk.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(Error::InvalidProfile("no samples on [r0, r]".into())),
        };
        if (first - r0).abs() > tol || (last - r).abs() > tol {
            return Err(Error::InvalidProfile(format!(
                "samples must span [r0, r] = [{r0}, {r}], got [{first}, {last}]"
            )));
        }
        let xs: Vec<f64> = bulk.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = bulk.iter().map(|p| p.1).collect();
        let spline = QuinticSpline::interpolate(&xs, &ys)?;
        let profile = Self { r0, r, params, shape: Shape::Spline(spline) };
        profile.validate()?;
        Ok(profile)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn params(&self) -> &EnergyDensityParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// `h^{(order)}` of the bulk formula, evaluable in a neighbourhood of
    /// `[r0, r]` (the formula's smooth extension).
    pub fn bulk_derivative(&self, order: usize, s: f64) -> f64 {
        match &self.shape {
            Shape::Polynomial { slope, antiderivative, anti_at_r } => match order {
                0 => antiderivative.eval(s) - anti_at_r,
                k => slope.nth_derivative(k - 1).eval(s),
            },
            Shape::Spline(sp) => sp.derivative(order, s),
        }
    }

    /// Height `h(s)` on `[0, r]`.
    pub fn height(&self, s: f64) -> f64 {
        self.bulk_derivative(0, s.max(self.r0))
    }

    /// `h^{(order)}(s)` of the piecewise profile, `order >= 1`: zero on the facet.
    pub fn slope_derivative(&self, order: usize, s: f64) -> f64 {
        if s < self.r0 {
            0.0
        } else {
            self.bulk_derivative(order, s)
        }
    }

    /// `H^{(order)}(s)` for `order = 0..=3`, by the chain rule applied to
    /// `H = -1 + μ φ(h')`, `φ(v) = |v|^{p-2}v`.
    pub fn big_h(&self, order: usize, s: f64) -> f64 {
        let v: Vec<f64> = (1..=order + 1).map(|k| self.bulk_derivative(k, s)).collect();
        let phi = |k: usize| slope_power_derivative(self.params.p(), k, v[0]);
        let mu = self.params.mu();
        match order {
            0 => -1.0 + mu * phi(0),
            1 => mu * phi(1) * v[1],
            2 => mu * (phi(2) * v[1] * v[1] + phi(1) * v[2]),
            3 => mu * (phi(3) * v[1].powi(3) + 3.0 * phi(2) * v[1] * v[2] + phi(1) * v[3]),
            _ => panic!("H derivatives implemented up to order 3, got {order}"),
        }
    }

    /// `H` computed from the bulk slope formula alone, without analytic
    /// derivatives; finite-difference checks differentiate this.
    pub fn big_h_from_slope(&self, s: f64) -> f64 {
        -1.0 + self.params.mu() * slope_power_derivative(self.params.p(), 0, self.bulk_derivative(1, s))
    }

    fn validate(&self) -> Result<()> {
        let (r0, r) = (self.r0, self.r);
        let scale = (0..=64)
            .map(|i| self.bulk_derivative(1, r0 + (r - r0) * i as f64 / 64.0).abs())
            .fold(0.0, f64::max);
        if !(scale > 0.0) {
            return Err(Error::InvalidProfile("profile is flat on [r0, r]".into()));
        }
        let h_r = self.height(r);
        if h_r.abs() > 1e-9 * scale * r {
            return Err(Error::InvalidProfile(format!("h(r) must vanish, got {h_r:e}")));
        }
        let slope_r0 = self.bulk_derivative(1, r0);
        if slope_r0.abs() > 1e-6 * scale {
            return Err(Error::InvalidProfile(format!("h'(r0) must vanish, got {slope_r0:e}")));
        }
        const CHECKS: usize = 200;
        for i in 1..CHECKS {
            let s = r0 + (r - r0) * i as f64 / CHECKS as f64;
            let v = self.bulk_derivative(1, s);
            if !(v < 0.0) {
                return Err(Error::InvalidProfile(format!("h'({s}) = {v:e} must be negative")));
            }
        }
        // H must be C³ on [r0, r]: finite values at the ends and agreement of
        // each analytic derivative with a difference quotient of the previous one.
        for s in [r0, r] {
            for k in 0..=3 {
                if !self.big_h(k, s).is_finite() {
                    return Err(Error::InvalidProfile(format!("H^({k})({s}) is not finite")));
                }
            }
        }
        let step = 1e-4 * (r - r0);
        for i in 1..20 {
            let s = r0 + (r - r0) * i as f64 / 20.0;
            for k in 0..3 {
                let fd = (self.big_h(k, s + step) - self.big_h(k, s - step)) / (2.0 * step);
                let an = self.big_h(k + 1, s);
                let mag = 1.0 + an.abs() + self.big_h(k, s).abs() / (r - r0);
                if (fd - an).abs() > 1e-3 * mag {
                    return Err(Error::InvalidProfile(format!(
                        "H is not C³ near s = {s}: derivative {} disagrees with difference quotient ({an:e} vs {fd:e})",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `φ^{(k)}(v)` for `φ(v) = |v|^{p-2}v`, i.e.
/// `(p-1)···(p-k) |v|^{p-1-k} sign(v)^{k+1}`. At `v = 0` the sign is taken
/// from the bulk side (`h' < 0`).
fn slope_power_derivative(p: f64, k: usize, v: f64) -> f64 {
    let coeff: f64 = (1..=k).map(|j| p - j as f64).product();
    if coeff == 0.0 {
        return 0.0;
    }
    let exponent = p - 1.0 - k as f64;
    let sign: f64 = if v > 0.0 { 1.0 } else { -1.0 };
    let magnitude = if exponent == 0.0 { 1.0 } else { v.abs().powf(exponent) };
    coeff * magnitude * sign.powi(k as i32 + 1)
}

fn check_radii(r0: f64, r: f64) -> Result<()> {
    if !(r0.is_finite() && r.is_finite() && r0 > 0.0 && r > r0) {
        return Err(Error::InvalidParameter(format!("radii must satisfy 0 < r0 < r, got r0={r0}, r={r}")));
    }
    if r0 < MIN_FACET_RATIO * r {
        return Err(Error::InvalidParameter(format!("facet radius {r0} is degenerate relative to r = {r}")));
    }
    Ok(())
}

/// The worked example: `r = 2 r0`, `p = 2`, `μ = 1` and
/// `h'(t) = -3/(5r0³)(t-r0)(t-2r0)² + (d-1)/(2r0⁴)(t-r0)³(t-2r0)` on `[r0, 2r0]`.
pub fn example_profile(dim: usize, r0: f64) -> Result<RadialProfile> {
    let params = EnergyDensityParams::new(1.0, 2.0, dim)?;
    Ok(RadialProfile::from_slope_polynomial(r0, 2.0 * r0, params, example_slope(dim, r0))?)
}

fn example_slope(dim: usize, r0: f64) -> Polynomial {
    let a = Polynomial::linear_factor(r0);
    let b = Polynomial::linear_factor(2.0 * r0);
    let first = (&a * &b.powi(2)).scale(-3.0 / (5.0 * r0.powi(3)));
    let second = (&a.powi(3) * &b).scale((dim as f64 - 1.0) / (2.0 * r0.powi(4)));
    &first + &second
}

/// Coefficients of the facet field `η(s) = C1 s + C2 s³` on `[0, r0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetExtension {
    pub c1: f64,
    pub c2: f64,
    pub r0: f64,
}

impl FacetExtension {
    /// Solves `C1 r0 + C2 r0³ = -1`, `C1 + 3 C2 r0² = H'(r0)`.
    pub fn from_slope(r0: f64, h1: f64) -> Self {
        let c2 = (h1 + 1.0 / r0) / (2.0 * r0 * r0);
        let c1 = -(h1 + 3.0 / r0) / 2.0;
        Self { c1, c2, r0 }
    }

    /// `max |η|` on `[0, r0]` from the endpoints and the interior critical
    /// point `s² = -C1/(3 C2)`.
    pub fn max_abs_exact(&self) -> f64 {
        let mut best = self.value(self.r0).abs();
        if self.c2 != 0.0 {
            let s2 = -self.c1 / (3.0 * self.c2);
            if s2 > 0.0 {
                let s = s2.sqrt();
                if s < self.r0 {
                    best = best.max(self.value(s).abs());
                }
            }
        }
        best
    }

    /// `max |η|` over `samples + 1` equispaced points of `[0, r0]`.
    pub fn max_abs_scan(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| self.value(self.r0 * i as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }
}

impl RadialFunction for FacetExtension {
    fn derivative(&self, order: usize, s: f64) -> f64 {
        match order {
            0 => self.c1 * s + self.c2 * s.powi(3),
            1 => self.c1 + 3.0 * self.c2 * s * s,
            2 => 6.0 * self.c2 * s,
            3 => 6.0 * self.c2,
            _ => 0.0,
        }
    }
}

pub fn solve_facet_extension(profile: &RadialProfile) -> FacetExtension {
    FacetExtension::from_slope(profile.r0, profile.big_h(1, profile.r0))
}

/// Analytic `H'(r0) ∈ [-9/r0, 0]` test.
pub fn interval_test(r0: f64, h1: f64) -> bool {
    let slack = INTERVAL_SLACK * (1.0 + 9.0 / r0);
    h1 >= -9.0 / r0 - slack && h1 <= slack
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `H'(r) + (d-1)H(r)/r`
    pub boundary_residual: f64,
    pub interval_ok: bool,
    /// `H''(r0) - 3H'(r0)/r0 - 3/r0²`; zero iff there is no surface term.
    pub no_delta_residual: f64,
    /// `max |η|` on `[0, r0]`.
    pub facet_bound_max: f64,
    pub h1_at_r0: f64,
}

impl AssumptionReport {
    pub fn boundary_tolerance(&self, profile: &RadialProfile) -> f64 {
        1e-8 * (1.0 + profile.big_h(1, profile.r).abs())
    }
}

pub fn check_assumptions(profile: &RadialProfile) -> AssumptionReport {
    let (r0, r) = (profile.r0, profile.r);
    let d = profile.dim() as f64;
    let h1 = profile.big_h(1, r0);
    let ext = FacetExtension::from_slope(r0, h1);
    AssumptionReport {
        boundary_residual: profile.big_h(1, r) + (d - 1.0) * profile.big_h(0, r) / r,
        interval_ok: interval_test(r0, h1),
        no_delta_residual: surface_coefficient(profile),
        facet_bound_max: ext.max_abs_exact(),
        h1_at_r0: h1,
    }
}

fn surface_coefficient(profile: &RadialProfile) -> f64 {
    let r0 = profile.r0;
    profile.big_h(2, r0) - 3.0 / r0 * profile.big_h(1, r0) - 3.0 / (r0 * r0)
}

/// The surface coefficient computed twice: from analytic derivatives and
/// from Richardson finite differences of `H` built from the slope formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTermCheck {
    pub analytic: f64,
    pub finite_difference: f64,
}

pub fn surface_term_check(profile: &RadialProfile) -> SurfaceTermCheck {
    let r0 = profile.r0;
    let h = |s: f64| profile.big_h_from_slope(s);
    let step = 0.02 * r0;
    let h1 = fd::richardson(&h, r0, 1, step);
    let h2 = fd::richardson(&h, r0, 2, step);
    SurfaceTermCheck {
        analytic: surface_coefficient(profile),
        finite_difference: h2 - 3.0 / r0 * h1 - 3.0 / (r0 * r0),
    }
}

/// Canonical restriction as a density: a constant on the facet, a radial
/// bulk density on `r0 < |x| < r`, and a surface term on `|x| = r0`.
#[derive(Clone, Debug)]
pub struct CanonicalRestriction {
    pub facet_value: f64,
    pub surface_coeff: f64,
    pub dim: usize,
    pub r0: f64,
    pub r: f64,
    profile: RadialProfile,
}

impl CanonicalRestriction {
    /// `H‴ + 2(d-1)H″/s + (d-1)(d-3)H′/s² - (d-1)(d-3)H/s³`.
    pub fn bulk_density(&self, s: f64) -> f64 {
        let d = self.dim as f64;
        let p = &self.profile;
        p.big_h(3, s) + 2.0 * (d - 1.0) * p.big_h(2, s) / s + (d - 1.0) * (d - 3.0) * p.big_h(1, s) / (s * s)
            - (d - 1.0) * (d - 3.0) * p.big_h(0, s) / s.powi(3)
    }

    /// `|∂Ω0|`, the area of the facet boundary.
    pub fn surface_area(&self) -> f64 {
        sphere_area(self.dim, self.r0)
    }

    /// Density at radius `s`; the surface term is not included.
    pub fn density(&self, s: f64) -> f64 {
        if s < self.r0 {
            self.facet_value
        } else {
            self.bulk_density(s)
        }
    }

    /// `(s, bulk density)` at `n` equispaced interior points of `(r0, r)`.
    pub fn bulk_samples(&self, n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|i| {
                let s = self.r0 + (self.r - self.r0) * i as f64 / (n + 1) as f64;
                (s, self.bulk_density(s))
            })
            .collect()
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }
}

/// Rejects profiles that violate the hypotheses, otherwise assembles the
/// three components of the canonical restriction.
pub fn canonical_restriction(profile: &RadialProfile) -> Result<CanonicalRestriction> {
    let report = check_assumptions(profile);
    if report.boundary_residual.abs() > report.boundary_tolerance(profile) {
        return Err(Error::AssumptionFailed {
            assumption: "H'(r) + (d-1)H(r)/r = 0",
            residual: report.boundary_residual,
        });
    }
    if !report.interval_ok {
        return Err(Error::AssumptionFailed { assumption: "H'(r0) in [-9/r0, 0]", residual: report.h1_at_r0 });
    }
    if report.facet_bound_max > 1.0 + FACET_BOUND_SLACK {
        return Err(Error::AssumptionFailed { assumption: "|g| <= 1 on the facet", residual: report.facet_bound_max - 1.0 });
    }
    let d = profile.dim() as f64;
    let r0 = profile.r0;
    Ok(CanonicalRestriction {
        facet_value: d * (d + 2.0) / (r0 * r0) * (report.h1_at_r0 + 1.0 / r0),
        surface_coeff: report.no_delta_residual,
        dim: profile.dim(),
        r0,
        r: profile.r,
        profile: profile.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// Max of `|radial_ode_residual|` over sample points of `(0, r0]`.
    pub ode_residual_max: f64,
    /// `η(r0) - H(r0)`.
    pub normal_trace_jump: f64,
    /// `η'(r0) + (d-1)η(r0)/r0 - (H'(r0) + (d-1)H(r0)/r0)`.
    pub divergence_jump: f64,
    /// `H'(r) + (d-1)H(r)/r`, the divergence of the bulk field on `|x| = r`.
    pub boundary_divergence: f64,
}

impl ExtensionReport {
    pub fn max_abs(&self) -> f64 {
        [self.ode_residual_max, self.normal_trace_jump, self.divergence_jump, self.boundary_divergence]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

pub fn verify_extension_field(profile: &RadialProfile, eta: &impl RadialFunction) -> ExtensionReport {
    let (r0, r) = (profile.r0, profile.r);
    let d = profile.dim() as f64;
    const SAMPLES: usize = 64;
    let ode_residual_max = (1..=SAMPLES)
        .map(|i| radial_ode_residual(profile.dim(), eta, r0 * i as f64 / SAMPLES as f64).abs())
        .fold(0.0, f64::max);
    let h0 = profile.big_h(0, r0);
    let h1 = profile.big_h(1, r0);
    ExtensionReport {
        ode_residual_max,
        normal_trace_jump: eta.value(r0) - h0,
        divergence_jump: eta.derivative(1, r0) + (d - 1.0) * eta.value(r0) / r0 - (h1 + (d - 1.0) * h0 / r0),
        boundary_divergence: profile.big_h(1, r) + (d - 1.0) * profile.big_h(0, r) / r,
    }
}
