//! Local analysis of a total field at a polygon corner: Fourier–Bessel fits on a
//! small circle, vanishing orders, the leading-term split and the corner
//! integral identity with its term-by-term bounds.

mod expansion;
mod ledger;

pub use expansion::*;
pub use ledger::*;

use thiserror::Error;

use crate::cgo_probe::{tau0, CgoError};
use crate::direct_solver::SolverError;
use crate::geometry::GeometryError;
use crate::special_functions::SpecialFnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CornerError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Configuration(String),
    #[error("all expansion coefficients are negligible: the vanishing order is numerically infinite")]
    InfiniteOrder,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Probe(#[from] CgoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Probe parameter tied to the far-field error level `T(ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSchedule {
    pub tau: f64,
    /// `max(2(N+1)/h, k, τ₀)`.
    pub lower_limit: f64,
    pub admissible: bool,
}

/// `τ = T^{−1/(N+1)} h^{−(N+3)/(N+1)}` for `N ≥ 1` and `τ = T^{−1/2} h^{−9/4}` for `N = 0`.
pub fn tau_schedule(n: usize, h: f64, t_eps: f64, k: f64) -> Result<TauSchedule, CornerError> {
    if !(t_eps > 0.0 && t_eps < 1.0) || !(h > 0.0 && h < 1.0) || !(k > 0.0) {
        return Err(CornerError::Precondition(format!("need T in (0,1), h in (0,1), k > 0; got {t_eps}, {h}, {k}")));
    }
    let tau = if n == 0 {
        t_eps.powf(-0.5) * h.powf(-2.25)
    } else {
        let p = (n + 1) as f64;
        t_eps.powf(-1.0 / p) * h.powf(-(n as f64 + 3.0) / p)
    };
    let lower_limit = (2.0 * (n as f64 + 1.0) / h).max(k).max(tau0(k, h));
    Ok(TauSchedule { tau, lower_limit, admissible: tau > lower_limit })
}
