//! Right derivative of the flow at a radial profile, measured from single
//! minimizing-movement steps and compared with the canonical restriction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{canonical_restriction, RadialProfile};

use super::certificate::{discretize_canonical_restriction, sample_profile};
use super::mesh::{Mesh, RadialGrid};
use super::step::{solve_step, StepOptions};
use super::check_exponent_range;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub tau: f64,
    pub n: usize,
    /// Measure-weighted mean of `(f¹ - f⁰)/τ` over nodes with `s <= r0/2`.
    pub facet_slope: f64,
    /// `|facet_slope + facet_value| / max(|facet_value|, 1)`.
    pub facet_error: f64,
    /// `‖(f¹ - f⁰)/τ + u‖_{H^{-1}}` with `u` the discretised restriction.
    pub distance: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheckReport {
    pub facet_value: f64,
    pub surface_coeff: f64,
    pub rows: Vec<SlopeRow>,
    /// `log(d_k/d_{k+1}) / log(τ_k/τ_{k+1})` for consecutive rows.
    pub distance_orders: Vec<f64>,
    pub facet_orders: Vec<f64>,
    /// Distance strictly decreases between the last two rows.
    pub tail_decreasing: bool,
}

/// Runs one step per `τ`. `grids` holds either one grid used for every
/// `τ`, or one grid per `τ` (joint refinement).
pub fn initial_slope_check(
    profile: &RadialProfile,
    taus: &[f64],
    grids: &[RadialGrid],
    tol: f64,
) -> Result<SlopeCheckReport> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("empty time-step sequence".into()));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("time steps must be positive and strictly decreasing".into()));
    }
    if grids.len() != 1 && grids.len() != taus.len() {
        return Err(Error::InvalidParameter(format!(
            "expected 1 or {} grids, got {}",
            taus.len(),
            grids.len()
        )));
    }
    let restriction = canonical_restriction(profile)?;
    let params = *profile.params();
    let mut rows = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let grid = grids[k.min(grids.len() - 1)];
        if grid.dim != profile.dim() || grid.r0 != profile.r0() || grid.r != profile.r() {
            return Err(Error::InvalidParameter("grid does not match the profile's radii or dimension".into()));
        }
        let mesh = Mesh::radial(grid);
        check_exponent_range(&mesh, &params)?;
        let f0 = sample_profile(&mesh, profile)?;
        let sol = solve_step(&mesh, &params, &f0.values, tau, None, &StepOptions::new(tol))?;
        let v: Vec<f64> = sol.f.iter().zip(&f0.values).map(|(a, b)| (a - b) / tau).collect();
        let u = discretize_canonical_restriction(&mesh, &restriction)?;

        let x = mesh.positions();
        let m = mesh.measures();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..mesh.n_free() {
            if x[i] <= 0.5 * profile.r0() {
                num += m[i] * v[i];
                den += m[i];
            }
        }
        let facet_slope = num / den;
        let diff: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a + b).collect();
        let distance = mesh.neg_sobolev_inner_raw(&diff, &diff).max(0.0).sqrt();
        rows.push(SlopeRow {
            tau,
            n: grid.n,
            facet_slope,
            facet_error: (facet_slope + restriction.facet_value).abs() / restriction.facet_value.abs().max(1.0),
            distance,
            iterations: sol.iterations,
        });
    }
    let order = |a: f64, b: f64, ta: f64, tb: f64| (a / b).ln() / (ta / tb).ln();
    let distance_orders = rows.windows(2).map(|w| order(w[0].distance, w[1].distance, w[0].tau, w[1].tau)).collect();
    let facet_orders = rows
        .windows(2)
        .map(|w| order(w[0].facet_error, w[1].facet_error, w[0].tau, w[1].tau))
        .collect();
    let tail_decreasing = rows.len() < 2 || rows[rows.len() - 1].distance < rows[rows.len() - 2].distance;
    Ok(SlopeCheckReport {
        facet_value: restriction.facet_value,
        surface_coeff: restriction.surface_coeff,
        rows,
        distance_orders,
        facet_orders,
        tail_decreasing,
    })
}
