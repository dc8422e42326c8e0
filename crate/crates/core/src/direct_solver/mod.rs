//! Exterior impedance scattering by a convex polygon.
//!
//! The total field is represented through its own boundary trace,
//! `u = u^i + D u + S(η u)`, with `S`, `D` the single and double layer
//! potentials of `Φ(x, y) = (i/4) H_0^{(1)}(k|x − y|)`. Taking the exterior
//! limit gives the second-kind equation `½u − K u − S(η u) = u^i`, uniquely
//! solvable unless `k²` is an interior Dirichlet eigenvalue (where the
//! condition estimate blows up and the solve is refused).
//!
//! Discretization: Nyström on Gauss–Legendre panels graded toward the
//! corners, tanh–sinh product quadrature for singular and nearly singular
//! panel/target pairs, dense LU.

mod disk;
mod farfield;
mod lu;
mod mesh;

pub use disk::{disk_series_oracle, DiskSeries};
pub use farfield::{far_field_error, FarFieldPattern};
pub use lu::{DenseMatrix, LuFactors};
pub use mesh::{BoundaryMesh, MeshControl, Panel};

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

use crate::geometry::{GeometryError, ImpedanceParam, Point2, Polygon};
use crate::quadrature::{lagrange_basis, TanhSinh};
use crate::special_functions::{hankel01, SpecialFnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("point ({x}, {y}) is not in the exterior of the obstacle")]
    Domain { x: f64, y: f64 },
    #[error("far-field grids differ: {0} vs {1} directions")]
    GridMismatch(usize, usize),
    #[error("series denominator vanishes at order {n}: too close to a resonance")]
    Resonance { n: usize },
    #[error("far-field file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Systems whose 1-norm condition estimate exceeds this are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Plane wave `e^{ik p·x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    k: f64,
    p: Point2,
}

impl IncidentWave {
    pub fn new(k: f64, p: Point2) -> Result<Self, SolverError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(SolverError::Validation(format!("wavenumber {k} must be positive")));
        }
        if !p.is_finite() || (p.norm() - 1.0).abs() > 1e-12 {
            return Err(SolverError::Validation(format!("direction ({}, {}) is not a unit vector", p.x, p.y)));
        }
        Ok(Self { k, p })
    }

    pub fn from_angle(k: f64, angle: f64) -> Result<Self, SolverError> {
        Self::new(k, Point2::from_polar(1.0, angle))
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn direction(&self) -> Point2 {
        self.p
    }

    pub fn eval(&self, x: Point2) -> Complex64 {
        Complex64::new(0.0, self.k * self.p.dot(x)).exp()
    }

    pub fn gradient(&self, x: Point2) -> [Complex64; 2] {
        let v = self.eval(x) * Complex64::new(0.0, self.k);
        [v * self.p.x, v * self.p.y]
    }
}

/// Single and double layer kernels `(Φ, ∂Φ/∂ν_y)` for displacement `d = x − y`.
fn layer_kernels(k: f64, d: Point2, normal: Point2) -> Result<(Complex64, Complex64), SpecialFnError> {
    let r = d.norm();
    let (h0, h1) = hankel01(k * r)?;
    let single = Complex64::new(0.0, 0.25) * h0;
    let double = Complex64::new(0.0, 0.25 * k) * h1 * (d.dot(normal) / r);
    Ok((single, double))
}

/// `x`-gradients of the two kernels.
fn layer_kernel_gradients(
    k: f64,
    d: Point2,
    normal: Point2,
) -> Result<([Complex64; 2], [Complex64; 2]), SpecialFnError> {
    let r = d.norm();
    let kr = k * r;
    let (h0, h1) = hankel01(kr)?;
    let ik4 = Complex64::new(0.0, 0.25 * k);
    let g_single = -ik4 * h1 / r;
    let dn = d.dot(normal);
    let h1p = h0 - h1 / kr;
    let radial = ik4 * (k * h1p * dn / (r * r) - h1 * dn / (r * r * r));
    let along = ik4 * h1 / r;
    Ok((
        [g_single * d.x, g_single * d.y],
        [radial * d.x + along * normal.x, radial * d.y + along * normal.y],
    ))
}

fn near_rule() -> &'static TanhSinh {
    static RULE: OnceLock<TanhSinh> = OnceLock::new();
    RULE.get_or_init(|| TanhSinh::with_cutoff(5, 1e-18))
}

/// Product-quadrature weights of one panel for target `x`: entry `m` holds
/// `∫ Φ(x, y) ℓ_m(y) ds_y` (single) and the double-layer analogue, where
/// `ℓ_m` is the Lagrange basis on the panel's Gauss nodes. `collinear`
/// suppresses the double layer, which vanishes on the target's own edge.
fn near_weights(
    mesh: &BoundaryMesh,
    panel: &Panel,
    x: Point2,
    k: f64,
    collinear: bool,
    single: &mut [Complex64],
    double: &mut [Complex64],
) -> Result<(), SpecialFnError> {
    let q = mesh.order();
    single.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    double.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    let mut basis = vec![0.0; q];
    let t_star = panel.project(x).clamp(-1.0, 1.0);
    let foot = panel.point(t_star);
    let offset = x - foot;
    let half_dir = (panel.b - panel.a) * 0.5;
    let jac = 0.5 * panel.length;
    let rule = near_rule();
    let pieces = [(-1.0, t_star, true), (t_star, 1.0, false)];
    for (lo, hi, split_on_right) in pieces {
        if hi - lo <= 0.0 {
            continue;
        }
        for (t, da, db, w) in rule.nodes(lo, hi) {
            // signed parameter distance from the split point, accurate near it
            let dt = if split_on_right { -db } else { da };
            let d = offset - half_dir * dt;
            if d.norm() == 0.0 {
                continue;
            }
            let (s, dl) = layer_kernels(k, d, panel.normal)?;
            lagrange_basis(&mesh.rule.nodes, &mesh.bary, t, &mut basis);
            let ww = w * jac;
            for m in 0..q {
                let f = ww * basis[m];
                single[m] += s * f;
                if !collinear {
                    double[m] += dl * f;
                }
            }
        }
    }
    Ok(())
}

/// Far-field kernel: `u∞(x̂) = ∫ far_field_kernel(k, x̂, y, ν_y, η(y)) u(y) ds_y`,
/// i.e. `e^{iπ/4}/√(8πk) (η − ik x̂·ν_y) e^{−ik x̂·y}`.
pub fn far_field_kernel(k: f64, xhat: Point2, y: Point2, normal: Point2, eta: Complex64) -> Complex64 {
    let gamma = Complex64::from_polar(1.0 / (8.0 * PI * k).sqrt(), PI / 4.0);
    let phase = Complex64::new(0.0, -k * xhat.dot(y)).exp();
    gamma * (eta - Complex64::new(0.0, k * xhat.dot(normal))) * phase
}

/// Solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub unknowns: usize,
    /// `‖A x − b‖∞ / ‖b‖∞` after refinement.
    pub relative_residual: f64,
    /// 1-norm condition estimate of the Nyström matrix.
    pub condition_estimate: f64,
    pub refinement_steps: usize,
}

/// Assembled and factored Nyström operator for one obstacle, impedance and
/// wavenumber; solves for any number of incident directions.
#[derive(Debug, Clone)]
pub struct ScatterSolver {
    mesh: Arc<BoundaryMesh>,
    impedance: ImpedanceParam,
    eta_nodes: Arc<Vec<Complex64>>,
    k: f64,
    matrix: DenseMatrix,
    lu: LuFactors,
    condition: f64,
}

impl ScatterSolver {
    pub fn new(poly: &Polygon, eta: &ImpedanceParam, k: f64, control: MeshControl) -> Result<Self, SolverError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(SolverError::Validation(format!("wavenumber {k} must be positive")));
        }
        let report = eta.validate(poly);
        if !report.passed() {
            let why: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
            return Err(SolverError::Validation(format!("impedance not admissible ({})", why.join("; "))));
        }
        let mesh = Arc::new(BoundaryMesh::new(Arc::new(poly.clone()), control)?);
        let eta_nodes: Vec<Complex64> = (0..mesh.len())
            .map(|j| eta.eval(poly, mesh.panels[mesh.node_panel[j]].edge, mesh.node_arclength[j]))
            .collect();
        let matrix = assemble(&mesh, &eta_nodes, k)?;
        let norm1 = matrix.norm1();
        let lu = LuFactors::factor(matrix.clone()).map_err(|_| SolverError::IllConditioned { condition: f64::INFINITY })?;
        let condition = norm1 * lu.inverse_norm1_estimate();
        if !(condition <= MAX_CONDITION) {
            return Err(SolverError::IllConditioned { condition });
        }
        Ok(Self { mesh, impedance: eta.clone(), eta_nodes: Arc::new(eta_nodes), k, matrix, lu, condition })
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, inc: IncidentWave) -> Result<ScatterSolution, SolverError> {
        if (inc.k - self.k).abs() > 1e-15 * self.k {
            return Err(SolverError::Validation(format!(
                "incident wavenumber {} differs from the operator's {}",
                inc.k, self.k
            )));
        }
        let rhs: Vec<Complex64> = self.mesh.nodes.iter().map(|&x| inc.eval(x)).collect();
        let bnorm = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut x = self.lu.solve(&rhs);
        let mut steps = 0;
        let mut residual;
        loop {
            let ax = self.matrix.matvec(&x);
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            residual = r.iter().map(|z| z.norm()).fold(0.0, f64::max) / bnorm;
            if residual <= 1e-12 || steps >= 3 {
                break;
            }
            let dx = self.lu.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            steps += 1;
        }
        if residual > 1e-10 {
            return Err(SolverError::IllConditioned { condition: self.condition });
        }
        Ok(ScatterSolution {
            mesh: self.mesh.clone(),
            density: x,
            eta_nodes: self.eta_nodes.clone(),
            impedance: self.impedance.clone(),
            incident: inc,
            diagnostics: Diagnostics {
                unknowns: self.mesh.len(),
                relative_residual: residual,
                condition_estimate: self.condition,
                refinement_steps: steps,
            },
        })
    }
}

fn assemble(mesh: &BoundaryMesh, eta: &[Complex64], k: f64) -> Result<DenseMatrix, SolverError> {
    let n = mesh.len();
    let q = mesh.order();
    let mut matrix = DenseMatrix::zeros(n);
    matrix
        .data
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<(), SpecialFnError> {
            let x = mesh.nodes[i];
            let edge_i = mesh.panels[mesh.node_panel[i]].edge;
            let mut ws = vec![Complex64::new(0.0, 0.0); q];
            let mut wd = vec![Complex64::new(0.0, 0.0); q];
            for panel in &mesh.panels {
                let first = panel.first_node;
                if panel.distance(x) < panel.length {
                    near_weights(mesh, panel, x, k, panel.edge == edge_i, &mut ws, &mut wd)?;
                    for m in 0..q {
                        row[first + m] -= wd[m] + ws[m] * eta[first + m];
                    }
                } else {
                    for j in first..first + q {
                        let (s, d) = layer_kernels(k, x - mesh.nodes[j], mesh.normals[j])?;
                        row[j] -= (d + s * eta[j]) * mesh.weights[j];
                    }
                }
            }
            row[i] += 0.5;
            Ok(())
        })?;
    Ok(matrix)
}

/// Solve with a fresh operator; use [`ScatterSolver`] to reuse one factorization.
pub fn solve(
    poly: &Polygon,
    eta: &ImpedanceParam,
    inc: IncidentWave,
    control: MeshControl,
) -> Result<ScatterSolution, SolverError> {
    ScatterSolver::new(poly, eta, inc.k, control)?.solve(inc)
}

/// Deepest panel subdivision used for near-boundary evaluation.
const MAX_SUBDIVISION_DEPTH: u32 = 12;
/// Subpanels per subdivision step.
const UPSAMPLE: usize = 8;

/// Boundary trace of the total field and the data needed to evaluate it anywhere outside.
#[derive(Debug, Clone)]
pub struct ScatterSolution {
    pub mesh: Arc<BoundaryMesh>,
    /// Total field `u` at the mesh nodes; the layer density of the representation.
    pub density: Vec<Complex64>,
    pub eta_nodes: Arc<Vec<Complex64>>,
    pub impedance: ImpedanceParam,
    pub incident: IncidentWave,
    pub diagnostics: Diagnostics,
}

/// Value and gradient of the scattered field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: Complex64,
    pub gradient: [Complex64; 2],
}

/// Boundary-condition check at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcCheck {
    pub edge: usize,
    pub arclength: f64,
    pub point: Point2,
    pub u: Complex64,
    pub normal_derivative: Complex64,
    /// `|∂u/∂ν + ηu|`.
    pub residual: f64,
    /// Distance to the nearest vertex.
    pub corner_distance: f64,
}

impl ScatterSolution {
    pub fn polygon(&self) -> &Polygon {
        &self.mesh.polygon
    }

    pub fn k(&self) -> f64 {
        self.incident.k
    }

    fn check_exterior(&self, x: Point2) -> Result<(), SolverError> {
        if !x.is_finite() || self.polygon().contains(x) {
            return Err(SolverError::Domain { x: x.x, y: x.y });
        }
        Ok(())
    }

    /// Scattered field and gradient at an exterior point.
    pub fn scattered_sample(&self, x: Point2) -> Result<FieldSample, SolverError> {
        self.check_exterior(x)?;
        let mut acc = FieldSample { value: Complex64::new(0.0, 0.0), gradient: [Complex64::new(0.0, 0.0); 2] };
        for p in 0..self.mesh.panels.len() {
            self.accumulate(x, p, -1.0, 1.0, 0, &mut acc)?;
        }
        Ok(acc)
    }

    /// Integrate the layer potentials over the part `[ta, tb]` of panel `p`,
    /// subdividing while the target is within one piece length.
    fn accumulate(
        &self,
        x: Point2,
        p: usize,
        ta: f64,
        tb: f64,
        depth: u32,
        acc: &mut FieldSample,
    ) -> Result<(), SolverError> {
        let mesh = &*self.mesh;
        let panel = &mesh.panels[p];
        let a = panel.point(ta);
        let b = panel.point(tb);
        let len = 0.5 * (tb - ta) * panel.length;
        let dist = crate::geometry::point_segment_distance(x, a, b);
        if dist < len && depth < MAX_SUBDIVISION_DEPTH {
            let step = (tb - ta) / UPSAMPLE as f64;
            for s in 0..UPSAMPLE {
                let lo = ta + step * s as f64;
                let hi = if s + 1 == UPSAMPLE { tb } else { lo + step };
                self.accumulate(x, p, lo, hi, depth + 1, acc)?;
            }
            return Ok(());
        }
        let q = mesh.order();
        let first = panel.first_node;
        let mut basis = vec![0.0; q];
        for (m, (&t, &w)) in mesh.rule.nodes.iter().zip(&mesh.rule.weights).enumerate() {
            let tt = 0.5 * (ta + tb) + 0.5 * (tb - ta) * t;
            let (u, eta) = if depth == 0 {
                (self.density[first + m], self.eta_nodes[first + m])
            } else {
                lagrange_basis(&mesh.rule.nodes, &mesh.bary, tt, &mut basis);
                let u: Complex64 = basis.iter().zip(&self.density[first..first + q]).map(|(l, v)| v * *l).sum();
                let e: Complex64 = basis.iter().zip(&self.eta_nodes[first..first + q]).map(|(l, v)| v * *l).sum();
                (u, e)
            };
            let y = panel.point(tt);
            let ds = w * 0.5 * len;
            let d = x - y;
            let (s, dl) = layer_kernels(self.k(), d, panel.normal)?;
            let (gs, gd) = layer_kernel_gradients(self.k(), d, panel.normal)?;
            let f = u * ds;
            acc.value += (dl + s * eta) * f;
            for c in 0..2 {
                acc.gradient[c] += (gd[c] + gs[c] * eta) * f;
            }
        }
        Ok(())
    }

    pub fn evaluate_scattered(&self, pts: &[Point2]) -> Result<Vec<Complex64>, SolverError> {
        pts.par_iter().map(|&x| self.scattered_sample(x).map(|s| s.value)).collect()
    }

    /// Total field `u^i + u^s`.
    pub fn evaluate_total(&self, pts: &[Point2]) -> Result<Vec<Complex64>, SolverError> {
        pts.par_iter()
            .map(|&x| self.scattered_sample(x).map(|s| s.value + self.incident.eval(x)))
            .collect()
    }

    /// Gradient of the total field.
    pub fn gradient_total(&self, pts: &[Point2]) -> Result<Vec<[Complex64; 2]>, SolverError> {
        pts.par_iter()
            .map(|&x| {
                let s = self.scattered_sample(x)?;
                let gi = self.incident.gradient(x);
                Ok([s.gradient[0] + gi[0], s.gradient[1] + gi[1]])
            })
            .collect()
    }

    /// `(u, ∂u/∂ν)` at the mesh nodes.
    pub fn boundary_traces(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let dudn = self.density.iter().zip(self.eta_nodes.iter()).map(|(u, e)| -e * u).collect();
        (self.density.clone(), dudn)
    }

    /// Total field trace at arclength `s` along edge `edge`, interpolated on its panel.
    pub fn trace_at(&self, edge: usize, s: f64) -> Complex64 {
        let (p, t) = self.mesh.locate(edge % self.polygon().len(), s);
        self.mesh.interpolate(&self.density, p, t)
    }

    /// Check `∂u/∂ν + ηu = 0` at the given boundary points using only the
    /// exterior representation: value and normal derivative are extrapolated
    /// to the boundary from six points along the outward normal.
    pub fn boundary_condition_check(&self, points: &[(usize, f64)]) -> Result<Vec<BcCheck>, SolverError> {
        let poly = self.polygon().clone();
        let min_edge = poly.edge_lengths().into_iter().fold(f64::INFINITY, f64::min);
        let step = 2e-3 * min_edge;
        // extrapolation weights to 0 from nodes 1..=6 (in units of `step`)
        let weights: Vec<f64> = (1..=6)
            .map(|m| {
                (1..=6)
                    .filter(|&j| j != m)
                    .map(|j| (0.0 - j as f64) / (m as f64 - j as f64))
                    .product()
            })
            .collect();
        points
            .par_iter()
            .map(|&(edge, s)| {
                let e = edge % poly.len();
                let (a, _) = poly.edge(e);
                let normal = poly.edge_normal(e);
                let xb = a + poly.edge_tangent(e) * s;
                let mut u = Complex64::new(0.0, 0.0);
                let mut dudn = Complex64::new(0.0, 0.0);
                for (m, w) in weights.iter().enumerate() {
                    let x = xb + normal * (step * (m + 1) as f64);
                    let smp = self.scattered_sample(x)?;
                    let gi = self.incident.gradient(x);
                    let val = smp.value + self.incident.eval(x);
                    let dn = (smp.gradient[0] + gi[0]) * normal.x + (smp.gradient[1] + gi[1]) * normal.y;
                    u += val * *w;
                    dudn += dn * *w;
                }
                let eta = self.impedance.eval(&poly, e, s);
                let corner_distance = poly.vertices().iter().map(|v| v.dist(xb)).fold(f64::INFINITY, f64::min);
                Ok(BcCheck {
                    edge: e,
                    arclength: s,
                    point: xb,
                    u,
                    normal_derivative: dudn,
                    residual: (dudn + eta * u).norm(),
                    corner_distance,
                })
            })
            .collect()
    }

    /// Far-field pattern on `m ≥ 64` uniform directions, normalized so that
    /// `u^s(x) = e^{ik|x|}/|x|^{1/2} (u∞(x̂) + O(1/|x|))`.
    pub fn far_field(&self, m: usize) -> Result<FarFieldPattern, SolverError> {
        if m < 64 {
            return Err(SolverError::Validation(format!("far field needs at least 64 directions, got {m}")));
        }
        let values = (0..m)
            .into_par_iter()
            .map(|l| self.far_field_at(Point2::from_polar(1.0, 2.0 * PI * l as f64 / m as f64)))
            .collect();
        Ok(FarFieldPattern::new(self.k(), self.incident.direction(), values))
    }

    /// `u∞(x̂)` for one unit direction.
    pub fn far_field_at(&self, xhat: Point2) -> Complex64 {
        let mesh = &*self.mesh;
        (0..mesh.len())
            .map(|j| {
                far_field_kernel(self.k(), xhat, mesh.nodes[j], mesh.normals[j], self.eta_nodes[j])
                    * self.density[j]
                    * mesh.weights[j]
            })
            .sum()
    }

    /// `−Im ∫_{∂K} (ū^i ∂_ν u^s + ū^s ∂_ν u^i) ds`, which equals `k ∫|u∞|²`
    /// when `η` is real.
    pub fn boundary_flux(&self) -> f64 {
        let mesh = &*self.mesh;
        let inc = self.incident;
        (0..mesh.len())
            .map(|j| {
                let x = mesh.nodes[j];
                let ui = inc.eval(x);
                let gi = inc.gradient(x);
                let dui = gi[0] * mesh.normals[j].x + gi[1] * mesh.normals[j].y;
                let us = self.density[j] - ui;
                let dus = -self.eta_nodes[j] * self.density[j] - dui;
                -((ui.conj() * dus + us.conj() * dui).im) * mesh.weights[j]
            })
            .sum()
    }
}
