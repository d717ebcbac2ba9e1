//! Fixed-step time integration with per-step diagnostics.

use serde::{Deserialize, Serialize};

use crate::convex::EnergyDensityParams;
use crate::error::{Error, Result};

use super::certificate::SubgradientCertificate;
use super::mesh::{GridFunction, Mesh};
use super::step::StepOptions;
use super::{FlowState, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub tau: f64,
    pub t_max: f64,
    pub tol: f64,
    /// `‖f‖_{H^{-1}}` below which the state counts as extinct.
    pub extinction_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub energy: f64,
    pub h_neg_norm: f64,
    pub sup_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub steps: usize,
    pub final_time: f64,
    /// First step from which `‖f‖_{H^{-1}}` stays below the threshold.
    pub extinction_step: Option<usize>,
    pub extinction_time: Option<f64>,
    /// Largest `E(f^{k+1}) - E(f^k)`; nonpositive for a dissipative run.
    pub max_energy_increase: f64,
    /// Largest `|mean f^k|` (periodic flavor; zero for radial runs).
    pub max_abs_mean: f64,
    pub max_inner_iterations: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveRun {
    pub rows: Vec<TimeSeriesRow>,
    pub final_state: FlowState,
    pub summary: EvolveSummary,
    /// Certificate recovered from the last step, if any step was taken.
    pub last_certificate: Option<SubgradientCertificate>,
}

fn row(mesh: &Mesh, state: &FlowState) -> Result<TimeSeriesRow> {
    Ok(TimeSeriesRow {
        t: state.time,
        energy: state.energy,
        h_neg_norm: mesh.neg_sobolev_norm(&state.f)?,
        sup_norm: state.f.sup_norm(),
    })
}

/// Integrates up to `t_max` with `ceil(t_max/τ)` steps of size `τ`.
pub fn evolve(mesh: &Mesh, params: &EnergyDensityParams, f0: GridFunction, options: &EvolveOptions) -> Result<EvolveRun> {
    if !(options.t_max.is_finite() && options.t_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_max must be nonnegative, got {}", options.t_max)));
    }
    let mut stepper = Stepper::new(mesh, *params, options.tau, StepOptions::new(options.tol))?;
    let steps = (options.t_max / options.tau - 1e-9).ceil().max(0.0) as usize;
    let mut state = FlowState::new(mesh, f0, params)?;
    let mut rows = vec![row(mesh, &state)?];
    let periodic = mesh.flavor() == super::Flavor::Periodic;
    let mut max_energy_increase = f64::NEG_INFINITY;
    let mut max_abs_mean: f64 = if periodic { mesh.mean(&state.f.values).abs() } else { 0.0 };
    let mut max_inner_iterations = 0;
    let mut max_residual: f64 = 0.0;
    let mut last_certificate = None;
    for k in 0..steps {
        let outcome = stepper.step(&state)?;
        let next = FlowState { time: (k + 1) as f64 * options.tau, ..outcome.state };
        max_energy_increase = max_energy_increase.max(next.energy - state.energy);
        if periodic {
            max_abs_mean = max_abs_mean.max(mesh.mean(&next.f.values).abs());
        }
        max_inner_iterations = max_inner_iterations.max(outcome.stats.iterations);
        max_residual = max_residual.max(outcome.stats.residual);
        state = next;
        last_certificate = Some(outcome.certificate);
        rows.push(row(mesh, &state)?);
    }
    let extinction_step = rows
        .iter()
        .rposition(|r| r.h_neg_norm > options.extinction_threshold)
        .map_or(Some(0), |last_above| (last_above + 1 < rows.len()).then_some(last_above + 1));
    Ok(EvolveRun {
        summary: EvolveSummary {
            steps,
            final_time: state.time,
            extinction_step,
            extinction_time: extinction_step.map(|k| rows[k].t),
            max_energy_increase: if steps == 0 { 0.0 } else { max_energy_increase },
            max_abs_mean,
            max_inner_iterations,
            max_residual,
        },
        rows,
        final_state: state,
        last_certificate,
    })
}
