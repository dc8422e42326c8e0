//! Exponential probes `u₀(x) = e^{ρ·x}`, `ρ = τd + i√(k²+τ²) d⊥`, attached to a
//! corner frame, with their edge normal derivatives and edge moments.
//!
//! All points and directions here are in the local coordinates of a
//! [`CornerFrame`]: vertex at the origin, the first edge on the positive
//! first axis, the second at angle `θ₀`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::{CornerFrame, Point2};
use crate::special_functions::{factorial, gamma, truncated_laplace_moment, LaplaceMoment, SpecialFnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgoError {
    #[error("invalid probe parameters: {0}")]
    Invalid(String),
    #[error("alpha' = {alpha} is infeasible: the sector margin of d is only {margin}")]
    Infeasible { alpha: f64, margin: f64 },
    #[error("certificate violated: {0}")]
    Certificate(String),
    #[error("the leading coefficient vanishes for every tried direction ({attempts} attempts)")]
    Degenerate { attempts: usize },
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Which straight edge of the corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    /// The edge at angle `θ₀`, exterior normal `(−sin θ₀, cos θ₀)`.
    Plus,
    /// The edge on the positive first axis, exterior normal `(0, −1)`.
    Minus,
}

impl Edge {
    pub const BOTH: [Edge; 2] = [Edge::Plus, Edge::Minus];

    pub fn direction(self, frame: &CornerFrame) -> Point2 {
        match self {
            Edge::Plus => frame.dir_plus(),
            Edge::Minus => frame.dir_minus(),
        }
    }

    pub fn normal(self, frame: &CornerFrame) -> Point2 {
        match self {
            Edge::Plus => frame.normal_plus(),
            Edge::Minus => frame.normal_minus(),
        }
    }
}

/// Deterministic offsets (radians) tried around the default direction angle.
pub const PHI_RETRY_OFFSETS: [f64; 8] = [0.1, -0.1, 0.2, -0.2, 0.3, -0.3, 0.4, -0.4];

/// The exponential solution, parametrized by the polar angle `φ` of `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoProbe {
    pub tau: f64,
    pub k: f64,
    pub phi: f64,
}

impl CgoProbe {
    pub fn new(tau: f64, k: f64, phi: f64) -> Result<Self, CgoError> {
        if !(tau.is_finite() && tau > 0.0) || !(k.is_finite() && k > 0.0) || !phi.is_finite() {
            return Err(CgoError::Invalid(format!("need tau > 0, k > 0, finite phi; got {tau}, {k}, {phi}")));
        }
        Ok(Self { tau, k, phi })
    }

    pub fn d(&self) -> Point2 {
        Point2::from_polar(1.0, self.phi)
    }

    pub fn d_perp(&self) -> Point2 {
        self.d().perp()
    }

    /// `√(k² + τ²)`.
    fn imag_scale(&self) -> f64 {
        self.k.hypot(self.tau)
    }

    /// Components of `ρ`.
    pub fn rho(&self) -> [Complex64; 2] {
        let (d, dp, s) = (self.d(), self.d_perp(), self.imag_scale());
        [Complex64::new(self.tau * d.x, s * dp.x), Complex64::new(self.tau * d.y, s * dp.y)]
    }

    /// `ρ·v` for a real vector `v`.
    pub fn rho_dot(&self, v: Point2) -> Complex64 {
        Complex64::new(self.tau * self.d().dot(v), self.imag_scale() * self.d_perp().dot(v))
    }

    /// `ρ·ρ + k²`, zero up to rounding.
    pub fn dispersion_defect(&self) -> Complex64 {
        let r = self.rho();
        r[0] * r[0] + r[1] * r[1] + self.k * self.k
    }

    pub fn eval(&self, x: Point2) -> Complex64 {
        self.rho_dot(x).exp()
    }

    pub fn gradient(&self, x: Point2) -> [Complex64; 2] {
        let u = self.eval(x);
        let r = self.rho();
        [r[0] * u, r[1] * u]
    }

    fn with_phi(&self, phi: f64) -> Self {
        Self { phi, ..*self }
    }
}

/// Evidence that `−d·x̂ > α′` on the closed sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCertificate {
    pub theta0: f64,
    pub phi: f64,
    pub d: Point2,
    pub alpha_prime: f64,
    /// `min −d·x̂` over the sector (attained on an extremal ray).
    pub margin: f64,
}

impl DirectionCertificate {
    pub fn check(&self, probe: &CgoProbe) -> Result<(), CgoError> {
        if probe.phi != self.phi {
            return Err(CgoError::Certificate(format!("probe angle {} differs from certified {}", probe.phi, self.phi)));
        }
        if !(self.margin > self.alpha_prime && self.alpha_prime > 0.0) {
            return Err(CgoError::Certificate(format!("margin {} does not exceed alpha' {}", self.margin, self.alpha_prime)));
        }
        Ok(())
    }
}

/// Midpoint of the admissible interval `(θ₀ + π/2, 3π/2)` for the direction angle.
pub fn default_phi(theta0: f64) -> f64 {
    0.5 * (theta0 + 0.5 * PI + 1.5 * PI)
}

/// `min −d·x̂` over `x̂` on the two extremal rays of the sector of opening `theta0`.
pub fn sector_margin(phi: f64, theta0: f64) -> f64 {
    let d = Point2::from_polar(1.0, phi);
    let a = -d.dot(Point2::new(1.0, 0.0));
    let b = -d.dot(Point2::from_polar(1.0, theta0));
    a.min(b)
}

/// Certify the direction angle `phi` for the sector of `frame`; `alpha_prime`
/// defaults to `0.9 ×` the margin.
pub fn certify(frame: &CornerFrame, phi: f64, alpha_prime: Option<f64>) -> Result<DirectionCertificate, CgoError> {
    let theta0 = frame.theta0;
    if !(phi > theta0 + 0.5 * PI && phi < 1.5 * PI) {
        return Err(CgoError::Invalid(format!("phi = {phi} outside ({}, {})", theta0 + 0.5 * PI, 1.5 * PI)));
    }
    let margin = sector_margin(phi, theta0);
    let alpha = alpha_prime.unwrap_or(0.9 * margin);
    if !(alpha > 0.0 && alpha <= 1.0 && alpha < margin) {
        return Err(CgoError::Infeasible { alpha, margin });
    }
    Ok(DirectionCertificate { theta0, phi, d: Point2::from_polar(1.0, phi), alpha_prime: alpha, margin })
}

/// Probe with the default direction angle for `frame`.
pub fn make_probe(
    tau: f64,
    k: f64,
    frame: &CornerFrame,
    alpha_prime: Option<f64>,
) -> Result<(CgoProbe, DirectionCertificate), CgoError> {
    let phi = default_phi(frame.theta0);
    let probe = CgoProbe::new(tau, k, phi)?;
    let cert = certify(frame, phi, alpha_prime)?;
    Ok((probe, cert))
}

/// `∂u₀/∂ν = multiplier · u₀` on the given edge, i.e. `ρ·ν`.
pub fn edge_normal_derivative(probe: &CgoProbe, frame: &CornerFrame, edge: Edge) -> Complex64 {
    probe.rho_dot(edge.normal(frame))
}

/// Edge moment of `r^N u₀` along one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMoment {
    /// `μ = −ρ·x̂` along the edge.
    pub mu: Complex64,
    /// `∫_0^h r^N e^{−μr} dr`.
    pub truncated: Complex64,
    /// `Γ(N+1)/μ^{N+1}`.
    pub infinite: Complex64,
    /// `2e^{−Re μ h/2}/Re μ`.
    pub tail_bound: f64,
    pub laplace: LaplaceMoment,
}

pub fn edge_moment(
    probe: &CgoProbe,
    cert: &DirectionCertificate,
    frame: &CornerFrame,
    n: usize,
    h: f64,
    edge: Edge,
) -> Result<EdgeMoment, CgoError> {
    cert.check(probe)?;
    let mu = -probe.rho_dot(edge.direction(frame));
    if !(mu.re > 0.0) {
        return Err(CgoError::Certificate(format!("Re mu = {} is not positive", mu.re)));
    }
    let laplace = truncated_laplace_moment(n as f64 + 1.0, mu, h)?;
    Ok(EdgeMoment { mu, truncated: laplace.value, infinite: laplace.full, tail_bound: laplace.tail_bound, laplace })
}

/// `k^N / (2^N N!)`.
pub fn leading_scale(n: usize, k: f64) -> f64 {
    (0.5 * k).powi(n as i32) / factorial(n)
}

/// Closed-form full-ray integral `∫_{Γ±} ∂u₀/∂ν · u′_N dσ` and its pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundFunctional {
    /// Direction angle actually used (after any retries).
    pub phi: f64,
    /// `−ρ·x̂` on the edge at angle `θ₀`.
    pub z1: Complex64,
    /// `ρ·ν` on the edge at angle `θ₀`.
    pub z2: Complex64,
    /// `−ρ·x̂` on the first-axis edge.
    pub z3: Complex64,
    /// `ρ·ν` on the first-axis edge.
    pub z4: Complex64,
    /// `(a e^{iNθ₀} + b e^{−iNθ₀}) k^N/(2^N N!)`, the value of `u′_N/r^N` on the `θ₀` edge.
    pub c_plus: Complex64,
    /// `(a + b) k^N/(2^N N!)`, the value of `u′_N/r^N` on the first-axis edge.
    pub c_minus: Complex64,
    /// `(a e^{iNθ₀} + b e^{−iNθ₀}) z₂ z₃^{N+1} + (a + b) z₄ z₁^{N+1}`.
    pub z: Complex64,
    /// `(z₁ z₃)^{N+1}`.
    pub w: Complex64,
    /// `Γ(N+1) k^N/(2^N N!) z/w`.
    pub integral: Complex64,
    pub value: f64,
}

/// Relative size below which the large-`τ` limit of `z/τ^{N+2}` counts as vanishing.
pub const LEADING_ORDER_FLOOR: f64 = 0.05;

/// `lim_{τ→∞} z/τ^{N+2}` for direction angle `phi`, divided by `|a_N| + |b_N|`.
///
/// It is `z` evaluated with `τ = 1` and `k = 0`, where all four multipliers
/// have unit modulus, so its modulus is at most 2.
pub fn leading_order_coefficient(a_n: Complex64, b_n: Complex64, n: usize, theta0: f64, phi: f64) -> Complex64 {
    let limit = CgoProbe { tau: 1.0, k: 0.0, phi };
    full_ray_functional(a_n, b_n, n, theta0, &limit).z / (a_n.norm() + b_n.norm())
}

/// Evaluate the full-ray functional for the leading corner mode
/// `u′_N = (a e^{iNθ} + b e^{−iNθ}) k^N r^N/(2^N N!)`, choosing the direction angle.
///
/// The probe's angle is used unless the large-`τ` limit of `z` nearly vanishes
/// there (modulus below [`LEADING_ORDER_FLOOR`]); then the angles
/// `φ + PHI_RETRY_OFFSETS[j]` are tried in order.
pub fn lower_bound_functional(
    a_n: Complex64,
    b_n: Complex64,
    n: usize,
    theta0: f64,
    probe: &CgoProbe,
) -> Result<LowerBoundFunctional, CgoError> {
    if a_n.norm() + b_n.norm() == 0.0 {
        return Err(CgoError::Invalid("(a_N, b_N) must not both vanish".into()));
    }
    let candidates = std::iter::once(0.0).chain(PHI_RETRY_OFFSETS);
    for offset in candidates {
        let phi = probe.phi + offset;
        if !(phi > theta0 + 0.5 * PI && phi < 1.5 * PI) {
            continue;
        }
        if leading_order_coefficient(a_n, b_n, n, theta0, phi).norm() > LEADING_ORDER_FLOOR {
            return Ok(full_ray_functional(a_n, b_n, n, theta0, &probe.with_phi(phi)));
        }
    }
    Err(CgoError::Degenerate { attempts: 1 + PHI_RETRY_OFFSETS.len() })
}

/// The full-ray functional at the probe's own direction angle, without retries.
pub fn full_ray_functional(a_n: Complex64, b_n: Complex64, n: usize, theta0: f64, probe: &CgoProbe) -> LowerBoundFunctional {
    let dir_plus = Point2::from_polar(1.0, theta0);
    let normal_plus = Point2::new(-theta0.sin(), theta0.cos());
    let z1 = -probe.rho_dot(dir_plus);
    let z2 = probe.rho_dot(normal_plus);
    let z3 = -probe.rho_dot(Point2::new(1.0, 0.0));
    let z4 = probe.rho_dot(Point2::new(0.0, -1.0));
    let nf = n as f64;
    let plus_mode = a_n * Complex64::from_polar(1.0, nf * theta0) + b_n * Complex64::from_polar(1.0, -nf * theta0);
    let minus_mode = a_n + b_n;
    let scale = leading_scale(n, probe.k);
    let p = n as i32 + 1;
    let z = plus_mode * z2 * z3.powi(p) + minus_mode * z4 * z1.powi(p);
    let w = (z1 * z3).powi(p);
    let integral = z / w * (gamma(nf + 1.0) * scale);
    LowerBoundFunctional {
        phi: probe.phi,
        z1,
        z2,
        z3,
        z4,
        c_plus: plus_mode * scale,
        c_minus: minus_mode * scale,
        z,
        w,
        integral,
        value: integral.norm(),
    }
}

/// `τ₀ = 10·max(k, 1/h)`.
pub fn tau0(k: f64, h: f64) -> f64 {
    10.0 * k.max(1.0 / h)
}

/// Smallest admissible `τ`: `max(2(N+1)/h, k, τ₀)`.
pub fn tau_min(n: usize, k: f64, h: f64) -> f64 {
    (2.0 * (n as f64 + 1.0) / h).max(k).max(tau0(k, h))
}

/// `|functional|·τ^N` over a geometric `τ` grid on `[τ₀, 8τ₀]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundSweep {
    pub n: usize,
    pub theta0: f64,
    pub taus: Vec<f64>,
    pub scaled: Vec<f64>,
    /// Fitted constant: the smallest scaled value.
    pub floor: f64,
    /// Largest over smallest scaled value.
    pub fluctuation: f64,
}

impl LowerBoundSweep {
    pub fn holds(&self, max_fluctuation: f64) -> bool {
        self.floor > 0.0 && self.fluctuation <= max_fluctuation
    }
}

/// Sweep the full-ray functional over `points` values of `τ` in `[τ₀, 8τ₀]`.
pub fn lower_bound_sweep(
    a_n: Complex64,
    b_n: Complex64,
    n: usize,
    k: f64,
    frame: &CornerFrame,
    points: usize,
) -> Result<LowerBoundSweep, CgoError> {
    if points < 2 {
        return Err(CgoError::Invalid("a sweep needs at least two points".into()));
    }
    let t0 = tau0(k, frame.h);
    let taus: Vec<f64> = (0..points).map(|j| t0 * 8f64.powf(j as f64 / (points - 1) as f64)).collect();
    let scaled = taus
        .iter()
        .map(|&tau| {
            let (probe, _) = make_probe(tau, k, frame, None)?;
            let f = lower_bound_functional(a_n, b_n, n, frame.theta0, &probe)?;
            Ok(f.value * tau.powi(n as i32))
        })
        .collect::<Result<Vec<f64>, CgoError>>()?;
    let floor = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let top = scaled.iter().copied().fold(0.0, f64::max);
    Ok(LowerBoundSweep { n, theta0: frame.theta0, taus, scaled, floor, fluctuation: top / floor })
}
