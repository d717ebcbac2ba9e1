//! Discrete `H^{-1}` gradient flow of `F` on a 1-D periodic grid or a
//! radial grid with a Dirichlet condition at `|x| = r`.

mod certificate;
mod evolve;
mod mesh;
mod slope;
mod step;

use serde::{Deserialize, Serialize};

use crate::convex::EnergyDensityParams;
use crate::error::{Error, Result};

pub use certificate::{
    discretize_canonical_restriction, facet_preserving_direction, radial_example_certificate, random_direction, sample_profile,
    verify_certificate, CertificateReport, SubgradientCertificate, LARGE_SCALE, SMALL_SCALE,
};
pub use evolve::{evolve, EvolveOptions, EvolveRun, EvolveSummary, TimeSeriesRow};
pub use mesh::{Edge, Flavor, GridFunction, GridVectorField, Mesh, PeriodicGrid, RadialGrid};
pub use slope::{initial_slope_check, SlopeCheckReport, SlopeRow};
pub use step::{default_dual_start, solve_step, InnerSolver, StepOptions, StepSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub f: GridFunction,
    pub energy: f64,
    pub step_count: usize,
}

impl FlowState {
    pub fn new(mesh: &Mesh, f: GridFunction, params: &EnergyDensityParams) -> Result<Self> {
        let energy = mesh.discrete_energy(&f, params)?;
        Ok(Self { time: 0.0, f, energy, step_count: 0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub gap: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: FlowState,
    /// Dual field of the step with `u = (f_old - f_new)/τ`.
    pub certificate: SubgradientCertificate,
    pub stats: StepStats,
}

/// Radial runs in `d >= 5` need `p >= 2d/(d+4)`; outside that range the
/// Dirichlet certificate carries an extra boundary pairing condition that
/// is not modelled.
pub fn check_exponent_range(mesh: &Mesh, params: &EnergyDensityParams) -> Result<()> {
    let d = mesh.dim();
    if mesh.flavor() == Flavor::Radial && d >= 5 {
        let p_min = 2.0 * d as f64 / (d as f64 + 4.0);
        if params.p() < p_min {
            return Err(Error::InvalidParameter(format!(
                "radial flow in d = {d} requires p >= 2d/(d+4) = {p_min}, got p = {}",
                params.p()
            )));
        }
    }
    Ok(())
}

/// Repeated minimizing-movement steps with a fixed `τ`, warm-starting each
/// inner solve from the previous dual field.
pub struct Stepper<'a> {
    mesh: &'a Mesh,
    params: EnergyDensityParams,
    tau: f64,
    options: StepOptions,
    warm: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(mesh: &'a Mesh, params: EnergyDensityParams, tau: f64, options: StepOptions) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        check_exponent_range(mesh, &params)?;
        Ok(Self { mesh, params, tau, options, warm: None })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&mut self, state: &FlowState) -> Result<StepOutcome> {
        let mesh = self.mesh;
        let f0 = &state.f.values;
        let sol = solve_step(mesh, &self.params, f0, self.tau, self.warm.as_deref(), &self.options)?;
        let u: Vec<f64> = f0.iter().zip(&sol.f).map(|(a, b)| (a - b) / self.tau).collect();
        let f = mesh.function(sol.f)?;
        let energy = mesh.discrete_energy(&f, &self.params)?;
        let certificate = SubgradientCertificate {
            field: GridVectorField::new(sol.dual.clone())?,
            claimed_u: GridFunction { flavor: mesh.flavor(), values: u },
        };
        self.warm = Some(sol.dual);
        Ok(StepOutcome {
            state: FlowState { time: state.time + self.tau, f, energy, step_count: state.step_count + 1 },
            certificate,
            stats: StepStats { iterations: sol.iterations, gap: sol.gap, residual: sol.residual },
        })
    }
}

/// One step `argmin F(f) + ‖f - state.f‖²_{H^{-1}}/(2τ)` with the default
/// solver.
pub fn minimizing_movement_step(
    mesh: &Mesh,
    state: &FlowState,
    tau: f64,
    params: &EnergyDensityParams,
    tol: f64,
) -> Result<StepOutcome> {
    Stepper::new(mesh, *params, tau, StepOptions::new(tol))?.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_range() {
        let mesh = Mesh::radial(RadialGrid::new(0.5, 1.0, 9, 6).unwrap());
        let low = EnergyDensityParams::new(1.0, 1.1, 6).unwrap();
        let ok = EnergyDensityParams::new(1.0, 1.2, 6).unwrap();
        assert!(check_exponent_range(&mesh, &low).is_err());
        assert!(check_exponent_range(&mesh, &ok).is_ok());
        let mesh3 = Mesh::radial(RadialGrid::new(0.5, 1.0, 9, 3).unwrap());
        assert!(check_exponent_range(&mesh3, &low.with_dim(3).unwrap()).is_ok());
    }
}
