//! Numerical laboratory for two-dimensional scattering by convex impedance
//! polygons: a boundary integral solver, corner probes built from complex
//! exponential solutions, propagation-of-smallness tooling and stability sweeps.

pub mod cgo_probe;
pub mod corner_analysis;
pub mod direct_solver;
pub mod geometry;
pub mod quadrature;
pub mod smallness;
pub mod special_functions;
pub mod stability_lab;

/// Decimal rendering with 17 significant digits, which round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
