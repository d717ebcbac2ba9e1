//! TOML run configuration. Every section is optional; missing sections and
//! fields fall back to the defaults below.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use sdflow_core::flow::Flavor;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub conjugate: ConjugateConfig,
    #[serde(default)]
    pub radial: ProfileConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub slope_check: SlopeConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugateConfig {
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub dim: Vec<usize>,
    /// Values of `|y|`; one random direction per value and `directions`.
    pub y_norms: Vec<f64>,
    pub directions: usize,
    pub refinement: usize,
    pub tolerance: f64,
    pub fenchel_young_samples: usize,
    pub fenchel_young_tolerance: f64,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        Self {
            p: vec![1.5, 2.0, 3.0, 4.0],
            mu: vec![0.5, 1.0, 2.0],
            dim: vec![1, 2, 3],
            y_norms: (0..=20).map(|i| 0.25 * i as f64).collect(),
            directions: 1,
            refinement: 14,
            tolerance: 1e-6,
            fenchel_young_samples: 1000,
            fenchel_young_tolerance: 1e-10,
        }
    }
}

impl ConjugateConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        for &p in &self.p {
            if !(p.is_finite() && p > 1.0) {
                bail!("conjugate.p entries must exceed 1, got {p}");
            }
        }
        for &mu in &self.mu {
            if !(mu.is_finite() && mu > 0.0) {
                bail!("conjugate.mu entries must be positive, got {mu}");
            }
        }
        if self.dim.contains(&0) {
            bail!("conjugate.dim entries must be at least 1");
        }
        if self.dim.iter().any(|&d| d > 3) {
            bail!("conjugate.dim entries above 3 make the grid oracle impractical");
        }
        if self.y_norms.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            bail!("conjugate.y_norms must be finite and nonnegative");
        }
        if !(self.tolerance > 0.0 && self.fenchel_young_tolerance > 0.0) {
            bail!("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// The closed-form example with `r = 2 r0`, `p = 2`, `μ = 1`.
    Example,
    /// Interpolated `(s, h)` samples on `[r0, r]`.
    Samples,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub profile: ProfileKind,
    pub dim: usize,
    pub r0: f64,
    pub r: f64,
    pub mu: f64,
    pub p: f64,
    pub samples: Vec<[f64; 2]>,
    /// Number of bulk points written to the restriction table.
    pub bulk_points: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Example,
            dim: 2,
            r0: 1.0,
            r: 2.0,
            mu: 1.0,
            p: 2.0,
            samples: Vec::new(),
            bulk_points: 64,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.r0.is_finite() && self.r.is_finite() && self.r0 > 0.0 && self.r0 < self.r) {
            bail!("radii must satisfy 0 < r0 < r, got r0 = {}, r = {}", self.r0, self.r);
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            bail!("mu must be positive, got {}", self.mu);
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            bail!("p must exceed 1, got {}", self.p);
        }
        if self.dim == 0 {
            bail!("dim must be at least 1");
        }
        match self.profile {
            ProfileKind::Example => {
                if (self.r - 2.0 * self.r0).abs() > 1e-12 * self.r || self.p != 2.0 || self.mu != 1.0 {
                    bail!("the example profile requires r = 2 r0, p = 2 and mu = 1");
                }
            }
            ProfileKind::Samples => {
                if self.samples.len() < 6 {
                    bail!("a sampled profile needs at least 6 samples, got {}", self.samples.len());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// `sin(2πx/ω)`.
    Sin,
    /// `cos(2πx/ω)`.
    Cos,
    /// Mean-zero hat with slopes ±1.
    Hat,
    /// The configured radial profile sampled on the grid.
    Profile,
    /// Explicit node values.
    Values,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub flavor: Flavor,
    pub n: usize,
    pub omega: f64,
    pub mu: f64,
    pub p: f64,
    pub tau: f64,
    pub t_max: f64,
    pub tol: f64,
    pub extinction_threshold: f64,
    pub energy_tolerance: f64,
    pub mean_tolerance: f64,
    pub initial: InitialKind,
    pub values: Vec<f64>,
    /// Radial runs read the profile from here.
    pub profile: ProfileConfig,
    /// Random directions for the certificate check of the last step.
    pub certificate_samples: usize,
    /// Also run the initial-slope check on the profile (radial only).
    pub slope_taus: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            flavor: Flavor::Periodic,
            n: 128,
            omega: std::f64::consts::TAU,
            mu: 1.0,
            p: 2.0,
            tau: 1e-2,
            t_max: 10.0,
            tol: 1e-10,
            extinction_threshold: 1e-6,
            energy_tolerance: 1e-8,
            mean_tolerance: 1e-12,
            initial: InitialKind::Sin,
            values: Vec::new(),
            profile: ProfileConfig::default(),
            certificate_samples: 40,
            slope_taus: Vec::new(),
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n < 4 {
            bail!("n must be at least 4, got {}", self.n);
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            bail!("mu must be positive, got {}", self.mu);
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            bail!("p must exceed 1, got {}", self.p);
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            bail!("tau must be positive, got {}", self.tau);
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            bail!("t_max must be nonnegative, got {}", self.t_max);
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            bail!("tol must be positive, got {}", self.tol);
        }
        match self.flavor {
            Flavor::Periodic => {
                if !(self.omega.is_finite() && self.omega > 0.0) {
                    bail!("omega must be positive, got {}", self.omega);
                }
                if self.initial == InitialKind::Profile {
                    bail!("initial = \"profile\" needs the radial flavor");
                }
                if !self.slope_taus.is_empty() {
                    bail!("slope_taus needs the radial flavor");
                }
            }
            Flavor::Radial => {
                if self.n < 5 {
                    bail!("radial grids need n >= 5");
                }
                self.profile.validate()?;
                if matches!(self.initial, InitialKind::Sin | InitialKind::Cos | InitialKind::Hat) {
                    bail!("radial runs start from initial = \"profile\" or \"values\"");
                }
            }
        }
        if self.initial == InitialKind::Values && self.values.is_empty() {
            bail!("initial = \"values\" needs a values list");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlopeConfig {
    pub profile: ProfileConfig,
    /// One grid size, or one per time step for joint refinement.
    pub n: Vec<usize>,
    pub taus: Vec<f64>,
    pub tol: f64,
    /// Allowed relative facet-slope error on the last row.
    pub max_facet_error: f64,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        Self {
            profile: ProfileConfig::default(),
            n: vec![1025],
            taus: vec![1e-2, 5e-3, 2.5e-3],
            tol: 1e-10,
            max_facet_error: 0.05,
        }
    }
}

impl SlopeConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.profile.validate()?;
        if self.n.is_empty() || self.n.iter().any(|&n| n < 5) {
            bail!("slope_check.n needs entries >= 5");
        }
        if self.n.len() != 1 && self.n.len() != self.taus.len() {
            bail!("slope_check.n must have one entry or one per tau");
        }
        if self.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) || self.taus.windows(2).any(|w| w[1] >= w[0]) {
            bail!("slope_check.taus must be positive and strictly decreasing");
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            bail!("tol must be positive, got {}", self.tol);
        }
        Ok(())
    }
}
