//! Convex-analysis toolkit for the singular surface-diffusion energy
//! `F(f) = ∫ σ(∇f)`, `σ(y) = |y| + (μ/p)|y|^p`.
//!
//! * [`convex`]: pointwise conjugates, subdifferentials and the prox of `σ`.
//! * [`radial`]: canonical restriction of the Dirichlet subdifferential for
//!   spherically symmetric surfaces with one flat facet.
//! * [`flow`]: discrete `H^{-1}` gradient flow by minimizing movements,
//!   certificate checks and the initial-slope study.

pub mod convex;
pub mod error;
pub mod fd;
pub mod flow;
pub mod linalg;
pub mod poly;
pub mod radial;
pub mod spline;

pub use convex::{EnergyDensityParams, SubdiffValue};
pub use error::{Error, Result};
