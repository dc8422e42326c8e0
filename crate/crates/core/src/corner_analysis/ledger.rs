//! Term-by-term evaluation of the corner integral identity
//!
//! ```text
//! ∫_{Γ±} ∂_ν u₀ u′_N = ∫_{Γ±_h} u₀ ∂_ν(u′ − u) − η(0)∫ u₀(u − u′) − ∫ δη u₀(u − u′)
//!                     − η(0)∫ u₀ u′_N − ∫ δη u₀ u′_N − η(0)∫ δu′ u₀ − ∫ δη δu′ u₀
//!                     − ∫ δu′ ∂_ν u₀ + ∫_{Γ±∖Γ±_h} ∂_ν u₀ u′_N + ∫_{Λ_h} (u₀ ∂_ν u′ − u′ ∂_ν u₀)
//! ```
//!
//! on the truncated sector `Q_h` of a corner of `K`, where `u` solves the
//! impedance problem for `K` and `u′` is analytic in `B_h`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

use super::{decompose, expand_solution, vanishing_order, CornerError, Decomposition, FourierBesselExpansion, DEFAULT_N_MAX};
use crate::cgo_probe::{full_ray_functional, CgoProbe, DirectionCertificate, Edge};
use crate::direct_solver::ScatterSolution;
use crate::fmt17;
use crate::geometry::{CornerFrame, Point2};
use crate::quadrature::GaussLegendre;
use crate::special_functions::{gamma, truncated_laplace_moment};

/// Boundary data of `u` on the two corner edges, parametrized by the distance `r` to the vertex.
pub trait EdgeTraces: Sync {
    fn value(&self, edge: Edge, r: f64) -> Complex64;
    /// Derivative along the exterior normal of `K`.
    fn normal_derivative(&self, edge: Edge, r: f64) -> Complex64;
    fn impedance(&self, edge: Edge, r: f64) -> Complex64;
}

/// Traces of a solver solution at the corner described by `frame`.
pub struct SolverTraces<'a> {
    pub solution: &'a ScatterSolution,
    pub frame: CornerFrame,
}

impl SolverTraces<'_> {
    fn locate(&self, edge: Edge, r: f64) -> (usize, f64) {
        let n = self.solution.polygon().len();
        match edge {
            Edge::Minus => (self.frame.edge_minus(n), r),
            Edge::Plus => (self.frame.edge_plus(n), self.frame.len_plus - r),
        }
    }
}

impl EdgeTraces for SolverTraces<'_> {
    fn value(&self, edge: Edge, r: f64) -> Complex64 {
        let (e, s) = self.locate(edge, r);
        self.solution.trace_at(e, s)
    }

    fn normal_derivative(&self, edge: Edge, r: f64) -> Complex64 {
        -self.impedance(edge, r) * self.value(edge, r)
    }

    fn impedance(&self, edge: Edge, r: f64) -> Complex64 {
        let (e, s) = self.locate(edge, r);
        self.solution.impedance.eval(self.solution.polygon(), e, s)
    }
}

/// Panel layout for the edge and arc quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerQuadrature {
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    /// Dyadic panels `[h2^{−j−1}, h2^{−j}]` towards the vertex, plus the innermost `[0, h2^{−levels}]`.
    pub levels: usize,
    /// Uniform subdivisions of every panel.
    pub splits: usize,
}

impl Default for LedgerQuadrature {
    fn default() -> Self {
        Self { order: 20, levels: 30, splits: 2 }
    }
}

impl LedgerQuadrature {
    pub fn refined(self) -> Self {
        Self { splits: 2 * self.splits, ..self }
    }

    fn edge_nodes(&self, h: f64) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(self.order);
        let mut breaks = vec![0.0];
        breaks.extend((0..=self.levels).rev().map(|j| h * 0.5f64.powi(j as i32)));
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            push_panel(&rule, w[0], w[1], self.splits, &mut out);
        }
        out
    }

    fn arc_nodes(&self, theta0: f64, panels: usize) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(self.order);
        let mut out = Vec::new();
        push_panel(&rule, 0.0, theta0, panels * self.splits, &mut out);
        out
    }
}

fn push_panel(rule: &GaussLegendre, a: f64, b: f64, pieces: usize, out: &mut Vec<(f64, f64)>) {
    for p in 0..pieces {
        let lo = a + (b - a) * p as f64 / pieces as f64;
        let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        out.extend(rule.nodes.iter().zip(&rule.weights).map(|(x, w)| (mid + half * x, half * w)));
    }
}

/// The ten right-hand terms, in order.
pub const TERM_NAMES: [&str; 10] = [
    "difference_flux",
    "eta0_difference",
    "delta_eta_difference",
    "eta0_leading",
    "delta_eta_leading",
    "eta0_remainder",
    "delta_eta_remainder",
    "remainder_flux",
    "ray_tail",
    "arc",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerTerm {
    pub name: &'static str,
    pub value: Complex64,
    pub bound: f64,
}

impl LedgerTerm {
    pub fn bound_ok(&self) -> bool {
        self.value.norm() <= self.bound * (1.0 + 1e-12)
    }
}

/// Constants entering the term bounds, computed from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerConstants {
    pub order: usize,
    pub eta0: Complex64,
    /// `C_N`.
    pub leading: f64,
    /// `ℛ`.
    pub remainder: f64,
    /// `sup |δη(x)|/|x|` on the edges.
    pub eta_slope: f64,
    /// `ℳ = (θ₀h)^{1/2} max(sup_Λ |u′|, sup_Λ |∂_r u′|)`.
    pub arc_scale: f64,
    pub alpha_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityLedger {
    pub lhs: Complex64,
    pub terms: Vec<LedgerTerm>,
    pub residual: f64,
    /// Residual over the larger of `|LHS|` and the largest term.
    pub relative_residual: f64,
    /// `∫_{Q_h} (u₀Δu′ − u′Δu₀)`, zero up to rounding since both solve the Helmholtz equation.
    pub green_volume: Complex64,
    pub constants: LedgerConstants,
    pub tau: f64,
    pub h: f64,
}

impl IdentityLedger {
    pub fn rhs_sum(&self) -> Complex64 {
        self.terms.iter().map(|t| t.value).sum()
    }

    pub fn bounds_ok(&self) -> bool {
        self.terms.iter().all(LedgerTerm::bound_ok)
    }

    pub fn term(&self, name: &str) -> Option<&LedgerTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// CSV with columns `term_name,re,im,abs,bound,bound_ok`; the left side and the
    /// residual are extra rows with empty bound columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term_name,re,im,abs,bound,bound_ok\n");
        let _ = writeln!(out, "lhs,{},{},{},,", fmt17(self.lhs.re), fmt17(self.lhs.im), fmt17(self.lhs.norm()));
        for t in &self.terms {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.name,
                fmt17(t.value.re),
                fmt17(t.value.im),
                fmt17(t.value.norm()),
                fmt17(t.bound),
                t.bound_ok()
            );
        }
        let r = self.lhs - self.rhs_sum();
        let _ = writeln!(out, "residual,{},{},{},,", fmt17(r.re), fmt17(r.im), fmt17(r.norm()));
        out
    }
}

/// Field data at one edge quadrature node.
struct EdgeNode {
    r: f64,
    weight: f64,
    u: Complex64,
    du: Complex64,
    delta_eta: Complex64,
    up: Complex64,
    dup: Complex64,
    leading: Complex64,
    remainder: Complex64,
    u0: Complex64,
    du0: Complex64,
}

/// `Γ(b)/(α′τ)^b + 2e^{−α′τh/2}/(α′τ)`.
fn moment_bound(b: f64, decay: f64, h: f64) -> f64 {
    gamma(b) / decay.powf(b) + 2.0 * (-0.5 * decay * h).exp() / decay
}

/// Evaluate both sides of the identity from edge traces of `u` and the expansion of `u′`.
///
/// The expansion must use the corner vertex as centre and the frame axis as angular origin.
pub fn identity_ledger(
    traces: &dyn EdgeTraces,
    u_prime: &FourierBesselExpansion,
    rel_tol: f64,
    frame: &CornerFrame,
    probe: &CgoProbe,
    cert: &DirectionCertificate,
    quad: LedgerQuadrature,
) -> Result<IdentityLedger, CornerError> {
    cert.check(probe)?;
    let h = frame.h;
    if (u_prime.center.dist(frame.vertex)) > 1e-12 * (1.0 + frame.vertex.norm())
        || (u_prime.axis - frame.axis).norm() > 1e-12
        || !(u_prime.radius >= h * (1.0 - 1e-12))
    {
        return Err(CornerError::Configuration("expansion must be centred at the vertex in the frame axes, with radius at least h".into()));
    }
    let tau = probe.tau;
    let decay = cert.alpha_prime * tau;
    let order = vanishing_order(u_prime, rel_tol)?.order;
    if decay < 2.0 * (order as f64 + 2.0) / h {
        return Err(CornerError::Configuration(format!(
            "alpha' tau = {decay} is below 2(N+2)/h = {}; increase tau",
            2.0 * (order as f64 + 2.0) / h
        )));
    }
    let split: Decomposition = decompose(u_prime, order);
    let eta0 = 0.5 * (traces.impedance(Edge::Plus, 0.0) + traces.impedance(Edge::Minus, 0.0));

    let edge_nodes = quad.edge_nodes(h);
    let jobs: Vec<(Edge, f64, f64)> =
        Edge::BOTH.iter().flat_map(|&e| edge_nodes.iter().map(move |&(r, w)| (e, r, w))).collect();
    let nodes: Vec<EdgeNode> = jobs
        .par_iter()
        .map(|&(edge, r, weight)| {
            let q = edge.direction(frame) * r;
            let nu = edge.normal(frame);
            let s = u_prime.sample_local(q)?;
            let leading = split.leading_local(q);
            let u0 = probe.eval(q);
            Ok(EdgeNode {
                r,
                weight,
                u: traces.value(edge, r),
                du: traces.normal_derivative(edge, r),
                delta_eta: traces.impedance(edge, r) - eta0,
                up: s.value,
                dup: s.gradient[0] * nu.x + s.gradient[1] * nu.y,
                leading,
                remainder: s.value - leading,
                u0,
                du0: probe.rho_dot(nu) * u0,
            })
        })
        .collect::<Result<_, CornerError>>()?;

    let sum = |f: &dyn Fn(&EdgeNode) -> Complex64| -> Complex64 { nodes.iter().map(|n| f(n) * n.weight).sum() };
    let t1 = sum(&|n| n.u0 * (n.dup - n.du));
    let t2 = -eta0 * sum(&|n| n.u0 * (n.u - n.up));
    let t3 = -sum(&|n| n.delta_eta * n.u0 * (n.u - n.up));
    let t4 = -eta0 * sum(&|n| n.u0 * n.leading);
    let t5 = -sum(&|n| n.delta_eta * n.u0 * n.leading);
    let t6 = -eta0 * sum(&|n| n.remainder * n.u0);
    let t7 = -sum(&|n| n.delta_eta * n.remainder * n.u0);
    let t8 = -sum(&|n| n.remainder * n.du0);

    // closed-form tail of ∂_ν u₀ u′_N beyond r = h on each ray
    let mut t9 = Complex64::new(0.0, 0.0);
    for edge in Edge::BOTH {
        let dir = edge.direction(frame);
        let mu = -probe.rho_dot(dir);
        let moment = truncated_laplace_moment(order as f64 + 1.0, mu, h)?;
        let coeff = split.leading_local(dir);
        t9 += probe.rho_dot(edge.normal(frame)) * coeff * moment.tail;
    }

    // arc r = h, θ ∈ [0, θ₀], radial normal
    let theta0 = frame.theta0;
    let rho_abs = (probe.k * probe.k + 2.0 * tau * tau).sqrt();
    let arc_panels = ((rho_abs * h * theta0 / 3.0).ceil() as usize).max(4);
    let arc: Vec<(Complex64, f64, f64)> = quad
        .arc_nodes(theta0, arc_panels)
        .par_iter()
        .map(|&(theta, w)| {
            let xhat = Point2::from_polar(1.0, theta);
            let q = xhat * h;
            let s = u_prime.sample_local(q)?;
            let dr_up = s.gradient[0] * xhat.x + s.gradient[1] * xhat.y;
            let u0 = probe.eval(q);
            let integrand = u0 * dr_up - s.value * probe.rho_dot(xhat) * u0;
            Ok((integrand * (w * h), s.value.norm(), dr_up.norm()))
        })
        .collect::<Result<_, CornerError>>()?;
    let t10: Complex64 = arc.iter().map(|a| a.0).sum();
    let arc_sup = arc.iter().map(|a| a.1.max(a.2)).fold(0.0, f64::max);

    // Δu′ = −k²u′ for the expansion and Δu₀ = (ρ·ρ)u₀
    let rho = probe.rho();
    let defect = rho[0] * rho[0] + rho[1] * rho[1] + probe.k * probe.k;
    let coarse = LedgerQuadrature { levels: 8, splits: 1, ..quad };
    let angular = coarse.arc_nodes(theta0, arc_panels);
    let volume: Vec<Complex64> = coarse
        .edge_nodes(h)
        .par_iter()
        .map(|&(r, wr)| {
            angular.iter().try_fold(Complex64::new(0.0, 0.0), |acc, &(theta, wt)| {
                let q = Point2::from_polar(r, theta);
                Ok(acc + probe.eval(q) * u_prime.eval_local(q)? * (wr * wt * r))
            })
        })
        .collect::<Result<_, CornerError>>()?;
    let green_volume = -defect * volume.iter().sum::<Complex64>();

    let sup = |f: &dyn Fn(&EdgeNode) -> f64| nodes.iter().map(f).fold(0.0, f64::max);
    let length = 2.0 * h;
    let w_sup = sup(&|n| (n.u - n.up).norm());
    let eta_slope = sup(&|n| if n.r > 0.0 { n.delta_eta.norm() / n.r } else { 0.0 });
    let delta_eta_sup = sup(&|n| n.delta_eta.norm());
    let c_n = split.leading_constant;
    let rem = split.remainder_constant;
    let ord = order as f64;
    let arc_scale = (theta0 * h).sqrt() * arc_sup;
    let bounds = [
        length * sup(&|n| (n.dup - n.du).norm()),
        length * eta0.norm() * w_sup,
        length * delta_eta_sup * w_sup,
        2.0 * eta0.norm() * c_n * moment_bound(ord + 1.0, decay, h),
        2.0 * eta_slope * c_n * moment_bound(ord + 2.0, decay, h),
        2.0 * eta0.norm() * rem * moment_bound(ord + 2.0, decay, h),
        2.0 * eta_slope * rem * moment_bound(ord + 3.0, decay, h),
        2.0 * rem * rho_abs * moment_bound(ord + 2.0, decay, h),
        2.0 * c_n * rho_abs * 2.0 * (-0.5 * decay * h).exp() / decay,
        2.0 * arc_scale * (1.0 + rho_abs * rho_abs).sqrt() * theta0.sqrt() * h.sqrt() * (-decay * h).exp(),
    ];
    let values = [t1, t2, t3, t4, t5, t6, t7, t8, t9, t10];
    let terms: Vec<LedgerTerm> = TERM_NAMES
        .iter()
        .zip(values.iter().zip(bounds))
        .map(|(name, (v, b))| LedgerTerm { name, value: *v, bound: b })
        .collect();

    let lhs = full_ray_functional(split.a_n, split.b_n, order, theta0, probe).integral;
    let rhs: Complex64 = values.iter().sum();
    let residual = (lhs - rhs).norm();
    let scale = values.iter().map(|v| v.norm()).fold(lhs.norm(), f64::max);
    Ok(IdentityLedger {
        lhs,
        terms,
        residual,
        relative_residual: if scale > 0.0 { residual / scale } else { residual },
        green_volume,
        constants: LedgerConstants {
            order,
            eta0,
            leading: c_n,
            remainder: rem,
            eta_slope,
            arc_scale,
            alpha_prime: cert.alpha_prime,
        },
        tau,
        h,
    })
}

/// Ledger for the corner `frame` of `K` (solution `sol_k`) against the field of `K′`
/// (solution `sol_k2`), which must stay clear of the disk `B_h` about the vertex.
pub fn integral_identity_ledger(
    sol_k: &ScatterSolution,
    sol_k2: &ScatterSolution,
    frame: &CornerFrame,
    probe: &CgoProbe,
    cert: &DirectionCertificate,
    quad: LedgerQuadrature,
) -> Result<IdentityLedger, CornerError> {
    if (sol_k.incident.k() - sol_k2.incident.k()).abs() > 0.0 {
        return Err(CornerError::Configuration("both solutions must share the wavenumber".into()));
    }
    let u_prime = expand_solution(sol_k2, frame.vertex, frame.axis, frame.h, DEFAULT_N_MAX)?;
    let traces = SolverTraces { solution: sol_k, frame: *frame };
    identity_ledger(&traces, &u_prime, 1e-8, frame, probe, cert, quad)
}
