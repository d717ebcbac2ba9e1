//! `sdflow`: conjugate sweeps, radial canonical restrictions and
//! `H^{-1}` flow runs from TOML configs.
//!
//! Exit codes: 0 ok, 1 a reported residual exceeds its tolerance,
//! 2 usage or configuration error, 3 solver failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "sdflow", version, about = "Singular surface-diffusion energy toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the closed-form conjugate with a grid oracle and check Fenchel–Young.
    ConjugateCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Negative control: perturb the closed form before comparing.
        #[arg(long, hide = true)]
        corrupt_formula: bool,
    },
    /// Assumption checks and canonical restriction for a radial profile.
    Radial {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the minimizing-movement flow.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One-step velocities against the canonical restriction.
    SlopeCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for randomised checks (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override (comparison tolerance or solver tolerance).
    #[arg(long)]
    tol: Option<f64>,
}

/// Why a command did not succeed.
pub enum Failure {
    Usage(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<sdflow_core::Error> for Failure {
    fn from(e: sdflow_core::Error) -> Self {
        use sdflow_core::Error as E;
        match e {
            E::SolverDiverged { .. } | E::NotPositiveDefinite(_) => Failure::Solver(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

pub struct Settings {
    pub config: RunConfig,
    pub out: output::Output,
    pub seed: u64,
    pub tol: Option<f64>,
}

fn settings(common: &CommonArgs) -> Result<Settings, Failure> {
    let config = RunConfig::load(common.config.as_deref())?;
    if let Some(t) = common.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Usage(anyhow::anyhow!("--tol must be positive, got {t}")));
        }
    }
    let seed = common.seed.or(config.seed).unwrap_or(0);
    let out = output::Output::create(&common.out)?;
    Ok(Settings { config, out, seed, tol: common.tol })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ConjugateCheck { common, corrupt_formula } => {
            settings(common).and_then(|s| commands::conjugate_check(&s, *corrupt_formula))
        }
        Command::Radial { common } => settings(common).and_then(|s| commands::radial(&s)),
        Command::Evolve { common } => settings(common).and_then(|s| commands::evolve(&s)),
        Command::SlopeCheck { common } => settings(common).and_then(|s| commands::slope_check(&s)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Solver(e) => eprintln!("solver failure: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let solver = Failure::from(sdflow_core::Error::SolverDiverged { what: "x", iterations: 1, residual: 1.0 });
        assert_eq!(solver.code(), 3);
        assert_eq!(Failure::from(sdflow_core::Error::NotPositiveDefinite(0)).code(), 3);
        assert_eq!(Failure::from(sdflow_core::Error::InvalidParameter("x".into())).code(), 2);
        assert_eq!(Failure::from(anyhow::anyhow!("bad config")).code(), 2);
    }
}
