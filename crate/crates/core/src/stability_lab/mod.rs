//! Stability experiments: perturbation families, shape and impedance sweeps,
//! the exponent `κ(N)`, the impedance stability function `ψ`, a ledger of fitted
//! constants and CSV/SVG reports.

mod config;
mod constants;
mod exponents;
mod report;
mod sweep;

pub use config::*;
pub use constants::*;
pub use exponents::*;
pub use report::*;
pub use sweep::*;

use thiserror::Error;

use crate::corner_analysis::CornerError;
use crate::direct_solver::SolverError;
use crate::geometry::GeometryError;
use crate::smallness::SmallnessError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("family member not admissible: {0}")]
    Inadmissible(String),
    #[error("psi is undefined at eps = {eps}: {reason}")]
    Domain { eps: f64, reason: String },
    #[error("constant `{0}` has not been fitted")]
    MissingConstant(String),
    #[error("constant `{name}` already fitted in run `{run}`")]
    AlreadyFitted { name: String, run: String },
    #[error("a report needs at least one row")]
    EmptyReport,
    #[error("malformed report: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Smallness(#[from] SmallnessError),
    #[error(transparent)]
    Corner(#[from] CornerError),
}

impl LabError {
    /// Errors caused by the input rather than by a computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Inadmissible(_) | Self::Geometry(_) | Self::Parse(_))
            || matches!(self, Self::Solver(SolverError::Validation(_)))
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), message: err.to_string() }
    }
}
