//! Discrete subgradient certificates: a field `g ∈ ∂σ(∇f)` together with
//! `u = -(-Δ) div g`, checked pointwise, against the subgradient inequality
//! `⟨u, k⟩_{H^{-1}} + F(f) <= F(f + k)`, and for compatibility of `u` with `g`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex::{sigma_conj_grad_scalar, EnergyDensityParams};
use crate::error::{Error, Result};
use crate::radial::{CanonicalRestriction, FacetExtension, RadialFunction, RadialProfile};

use super::mesh::{Flavor, GridFunction, GridVectorField, Mesh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgradientCertificate {
    pub field: GridVectorField,
    pub claimed_u: GridFunction,
}

impl SubgradientCertificate {
    /// Certificate whose `u` is computed from the field: `u = (-Δ)∇*g`.
    pub fn from_field(mesh: &Mesh, field: GridVectorField) -> Self {
        let u = mesh.laplacian(&mesh.gradient_adjoint(&field.values));
        Self { field, claimed_u: GridFunction { flavor: mesh.flavor(), values: u } }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Max over edges of `|∇f - ∂σ^#(g)|`. Equivalent to `g ∈ ∂σ(∇f)`, and
    /// well conditioned where `σ'` is not (near facets for `p < 2`).
    pub inclusion_residual: f64,
    /// Largest `⟨u, k⟩ + F(f) - F(f + k)` over the sampled directions,
    /// clipped below at zero.
    pub worst_violation: f64,
    pub worst_violation_small: f64,
    pub worst_violation_large: f64,
    /// `max |∇*g - (-Δ)^{-1}u|` over free nodes.
    pub compatibility_residual: f64,
    pub samples: usize,
}

/// Amplitudes of the sampled directions.
pub const SMALL_SCALE: f64 = 1e-6;
pub const LARGE_SCALE: f64 = 1.0;
const MODES: usize = 8;

/// A smooth random direction on the mesh: a short random Fourier series,
/// periodic on the torus and even with a zero at `r` in the radial case.
/// Its nodal values do not depend on the resolution beyond sampling.
pub fn random_direction(mesh: &Mesh, rng: &mut impl Rng, scale: f64) -> Vec<f64> {
    let coeffs = random_coeffs(rng);
    let x = mesh.positions();
    let k: Vec<f64> = match mesh.flavor() {
        Flavor::Periodic => {
            let omega = x[1] * x.len() as f64;
            x.iter().map(|&t| fourier(&coeffs, 2.0 * PI * t / omega)).collect()
        }
        Flavor::Radial => {
            let r = x[x.len() - 1];
            x.iter()
                .map(|&s| {
                    coeffs.iter().enumerate().map(|(j, (a, _))| {
                        a * ((j as f64 + 0.5) * PI * s / r).cos() / (j + 1) as f64
                    }).sum()
                })
                .collect()
        }
    };
    normalize(mesh, k, scale)
}

/// A random direction of the form `φ(f)`: constant wherever `f` is, so it
/// never breaks a facet. `φ(0) = 0`, which keeps the radial pin.
pub fn facet_preserving_direction(mesh: &Mesh, f: &[f64], rng: &mut impl Rng, scale: f64) -> Vec<f64> {
    let coeffs = random_coeffs(rng);
    let lo = f.iter().copied().fold(0.0, f64::min);
    let hi = f.iter().copied().fold(0.0, f64::max);
    if hi - lo <= 0.0 {
        return random_direction(mesh, rng, scale);
    }
    let k = f.iter().map(|&y| fourier(&coeffs, PI * (y - lo) / (hi - lo)) - fourier(&coeffs, PI * (-lo) / (hi - lo))).collect();
    normalize(mesh, k, scale)
}

fn random_coeffs(rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..MODES).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn fourier(coeffs: &[(f64, f64)], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, (a, b))| {
            let w = (j + 1) as f64 * t;
            (a * w.cos() + b * w.sin()) / (j + 1) as f64
        })
        .sum()
}

fn normalize(mesh: &Mesh, mut k: Vec<f64>, scale: f64) -> Vec<f64> {
    let sup = k.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let factor = if sup > 0.0 { scale / sup } else { 0.0 };
    k.iter_mut().for_each(|v| *v *= factor);
    if mesh.flavor() == Flavor::Periodic {
        let mean = mesh.mean(&k);
        k.iter_mut().for_each(|v| *v -= mean);
    } else {
        let last = k.len() - 1;
        k[last] = 0.0;
    }
    k
}

/// Checks a certificate against `f`. Directions alternate between sup-norm
/// [`SMALL_SCALE`] and [`LARGE_SCALE`], and between smooth random
/// functions and facet-preserving ones, which probe `⟨u, k⟩ = ⟨g, ∇k⟩`
/// without the slack `(1 - |g|)|∇k|` of a broken facet.
pub fn verify_certificate(
    mesh: &Mesh,
    f: &GridFunction,
    cert: &SubgradientCertificate,
    params: &EnergyDensityParams,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    for (name, len, expected) in [
        ("f", f.values.len(), mesh.n_values()),
        ("claimed_u", cert.claimed_u.values.len(), mesh.n_values()),
        ("field", cert.field.values.len(), mesh.edges().len()),
    ] {
        if len != expected {
            return Err(Error::FlavorMismatch(format!("{name} has {len} entries, grid expects {expected}")));
        }
    }
    if f.flavor != mesh.flavor() || cert.claimed_u.flavor != mesh.flavor() {
        return Err(Error::FlavorMismatch("certificate flavor differs from the grid".into()));
    }
    let g = &cert.field.values;
    let u = &cert.claimed_u.values;
    let df = mesh.gradient(&f.values);
    let inclusion_residual = df
        .iter()
        .zip(g)
        .map(|(t, gv)| (t - sigma_conj_grad_scalar(params, *gv)).abs())
        .fold(0.0, f64::max);

    let potential = mesh.inverse_laplacian(u);
    let adj = mesh.gradient_adjoint(g);
    let compatibility_residual = (0..mesh.n_free())
        .map(|i| (adj[i] - potential[i]).abs())
        .fold(0.0, f64::max);

    let energy = mesh.energy_raw(&f.values, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut small = f64::NEG_INFINITY;
    let mut large = f64::NEG_INFINITY;
    for i in 0..samples {
        let scale = if i % 2 == 0 { SMALL_SCALE } else { LARGE_SCALE };
        let k = if (i / 2) % 2 == 0 {
            random_direction(mesh, &mut rng, scale)
        } else {
            facet_preserving_direction(mesh, &f.values, &mut rng, scale)
        };
        let moved: Vec<f64> = f.values.iter().zip(&k).map(|(a, b)| a + b).collect();
        let violation = mesh.l2_inner(&potential, &k) + energy - mesh.energy_raw(&moved, params);
        let slot = if i % 2 == 0 { &mut small } else { &mut large };
        *slot = slot.max(violation);
    }
    let small = small.max(0.0);
    let large = large.max(0.0);
    Ok(CertificateReport {
        inclusion_residual,
        worst_violation: small.max(large),
        worst_violation_small: small,
        worst_violation_large: large,
        compatibility_residual,
        samples,
    })
}

/// Nodal values of the canonical restriction on a radial mesh: the facet
/// constant inside, the bulk density outside, and at the facet-edge node
/// the surface term spread over that node's cell,
/// `surface_coeff · |∂Ω0| / m_{r0}`.
pub fn discretize_canonical_restriction(mesh: &Mesh, restriction: &CanonicalRestriction) -> Result<Vec<f64>> {
    let facet = radial_facet_node(mesh, restriction.r0)?;
    let x = mesh.positions();
    let m = mesh.measures();
    let mut u: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &s)| if i < facet { restriction.facet_value } else { restriction.bulk_density(s) })
        .collect();
    let last = u.len() - 1;
    u[last] = 0.0;
    // the facet node's cell straddles r0: average the two sides by measure
    let s0 = x[facet];
    let inner_half = 0.5 * (x[facet] - x[facet - 1]);
    let outer_half = 0.5 * (x[facet + 1] - x[facet]);
    let shell = |a: f64, b: f64| b.powi(mesh.dim() as i32) - a.powi(mesh.dim() as i32);
    let inner = shell(s0 - inner_half, s0);
    let outer = shell(s0, s0 + outer_half);
    let bulk_value = restriction.bulk_density(s0);
    u[facet] = (inner * restriction.facet_value + outer * bulk_value) / (inner + outer)
        + restriction.surface_coeff * restriction.surface_area() / m[facet];
    Ok(u)
}

fn radial_facet_node(mesh: &Mesh, r0: f64) -> Result<usize> {
    if mesh.flavor() != Flavor::Radial {
        return Err(Error::FlavorMismatch("canonical restriction needs a radial grid".into()));
    }
    let facet = mesh.facet_node().expect("radial meshes carry a facet node");
    if (mesh.positions()[facet] - r0).abs() > 1e-12 * r0 {
        return Err(Error::InvalidParameter(format!(
            "grid facet node {} does not match r0 = {r0}",
            mesh.positions()[facet]
        )));
    }
    Ok(facet)
}

/// Certificate for a radial profile sampled on the mesh, built from the
/// continuous facet field `η` and bulk field `H` at edge midpoints, with
/// `u` the discretised canonical restriction.
pub fn radial_example_certificate(
    mesh: &Mesh,
    restriction: &CanonicalRestriction,
    extension: &FacetExtension,
) -> Result<SubgradientCertificate> {
    radial_facet_node(mesh, restriction.r0)?;
    let profile = restriction.profile();
    let field = mesh
        .edge_midpoints()
        .iter()
        .map(|&s| if s < restriction.r0 { extension.value(s) } else { profile.big_h(0, s) })
        .collect();
    let u = discretize_canonical_restriction(mesh, restriction)?;
    Ok(SubgradientCertificate {
        field: GridVectorField::new(field)?,
        claimed_u: GridFunction { flavor: Flavor::Radial, values: u },
    })
}

/// The profile `h` sampled at the mesh nodes.
pub fn sample_profile(mesh: &Mesh, profile: &RadialProfile) -> Result<GridFunction> {
    mesh.project(mesh.positions().iter().map(|&s| profile.height(s)).collect())
}
