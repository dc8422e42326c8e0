//! Propagation of smallness for Helmholtz fields: three-sphere checks on sampled
//! sup norms, chains of disks through the eroded exterior, iterated propagation
//! along a chain and the near-field to boundary experiment.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

use crate::cgo_probe::Edge;
use crate::corner_analysis::expand_on_circle;
use crate::direct_solver::{ScatterSolution, SolverError};
use crate::fmt17;
use crate::geometry::{Cone, CornerFrame, ErodedGrid, GeometryError, Point2, Polygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmallnessError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("disk of radius {radius} about ({}, {}) leaves the field's domain", center.x, center.y)]
    OutsideDomain { center: Point2, radius: f64 },
    #[error("no path between the end points in the eroded region")]
    Disconnected,
    #[error("radius schedule: {0}")]
    Schedule(String),
    #[error("chain audit failed: {0}")]
    Audit(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A solution of `Δu + k²u = 0` on an open set.
pub trait HelmholtzField: Sync {
    fn k(&self) -> f64;
    fn value(&self, x: Point2) -> Result<Complex64, SmallnessError>;
    /// Whether the closed disk lies in the domain of the field.
    fn contains_disk(&self, center: Point2, radius: f64) -> bool;

    fn values(&self, pts: &[Point2]) -> Result<Vec<Complex64>, SmallnessError> {
        pts.par_iter().map(|&x| self.value(x)).collect()
    }

    /// Values at `pts`, all inside the closed disk; fields that are costly to evaluate may
    /// go through an expansion on the disk.
    fn values_in_disk(&self, center: Point2, radius: f64, pts: &[Point2]) -> Result<Vec<Complex64>, SmallnessError> {
        let _ = (center, radius);
        self.values(pts)
    }
}

/// `Σ c_j e^{ik d_j·x}`, a Helmholtz solution on the whole plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSum {
    pub k: f64,
    pub waves: Vec<(Complex64, Point2)>,
}

impl PlaneWaveSum {
    /// `count` waves with uniform directions and amplitudes of modulus in `[0.5, 1.5)`.
    pub fn random<R: Rng>(rng: &mut R, k: f64, count: usize) -> Self {
        let waves = (0..count)
            .map(|_| {
                let amp = Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..2.0 * PI));
                (amp, Point2::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
            })
            .collect();
        Self { k, waves }
    }
}

impl HelmholtzField for PlaneWaveSum {
    fn k(&self) -> f64 {
        self.k
    }

    fn value(&self, x: Point2) -> Result<Complex64, SmallnessError> {
        Ok(self.waves.iter().map(|(c, d)| c * Complex64::from_polar(1.0, self.k * d.dot(x))).sum())
    }

    fn contains_disk(&self, _center: Point2, _radius: f64) -> bool {
        true
    }
}

/// `w = u − u′` for two solutions with the same incident wave, defined outside both obstacles.
#[derive(Debug, Clone, Copy)]
pub struct SolutionDifference<'a> {
    pub u: &'a ScatterSolution,
    pub u_prime: &'a ScatterSolution,
}

impl<'a> SolutionDifference<'a> {
    pub fn new(u: &'a ScatterSolution, u_prime: &'a ScatterSolution) -> Result<Self, SmallnessError> {
        if u.incident != u_prime.incident {
            return Err(SmallnessError::Precondition("both solutions need the same incident wave".into()));
        }
        Ok(Self { u, u_prime })
    }

    fn outside(poly: &Polygon, x: Point2) -> bool {
        !poly.contains(x)
    }
}

impl HelmholtzField for SolutionDifference<'_> {
    fn k(&self) -> f64 {
        self.u.incident.k()
    }

    fn value(&self, x: Point2) -> Result<Complex64, SmallnessError> {
        if !Self::outside(self.u.polygon(), x) || !Self::outside(self.u_prime.polygon(), x) {
            return Err(SmallnessError::OutsideDomain { center: x, radius: 0.0 });
        }
        // the incident parts cancel
        let a = self.u.scattered_sample(x)?.value;
        let b = self.u_prime.scattered_sample(x)?.value;
        Ok(a - b)
    }

    fn contains_disk(&self, center: Point2, radius: f64) -> bool {
        [self.u.polygon(), self.u_prime.polygon()]
            .iter()
            .all(|p| Self::outside(p, center) && p.boundary_distance(center) > radius)
    }

    /// Through a Fourier–Bessel fit on the rim when `k·radius < 1`, checked against direct
    /// evaluation at interior points; direct evaluation otherwise or when the check fails.
    fn values_in_disk(&self, center: Point2, radius: f64, pts: &[Point2]) -> Result<Vec<Complex64>, SmallnessError> {
        if self.k() * radius >= 1.0 || pts.len() <= EXPANSION_SAMPLES {
            return self.values(pts);
        }
        let axis = Point2::new(1.0, 0.0);
        let rim: Vec<Point2> = (0..EXPANSION_SAMPLES)
            .map(|j| center + Point2::from_polar(radius, 2.0 * PI * j as f64 / EXPANSION_SAMPLES as f64))
            .collect();
        let samples = self.values(&rim)?;
        let Ok(exp) = expand_on_circle(&samples, center, axis, self.k(), radius, EXPANSION_SAMPLES / 4) else {
            return self.values(pts);
        };
        let scale = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let probes = disk_points(center, 0.9 * radius, 16);
        let direct = self.values(&probes)?;
        let fit_ok = probes.iter().zip(&direct).all(|(&x, d)| exp.eval(x).is_ok_and(|v| (v - d).norm() <= EXPANSION_TOL * scale));
        if !fit_ok {
            return self.values(pts);
        }
        pts.par_iter().map(|&x| exp.eval(x).map_err(|e| SmallnessError::Precondition(e.to_string()))).collect()
    }
}

/// Rim samples of the Fourier–Bessel surrogate used for dense disk sampling.
const EXPANSION_SAMPLES: usize = 128;
/// Largest misfit of the surrogate, relative to the rim sup, at the interior check points.
const EXPANSION_TOL: f64 = 1e-9;

/// Relative five-point residual `|Δ_h u + k²u| / (|Δ_h u| + k²|u|)` at `x`.
pub fn helmholtz_residual(field: &dyn HelmholtzField, x: Point2, step: f64) -> Result<f64, SmallnessError> {
    if !field.contains_disk(x, 2.0 * step) {
        return Err(SmallnessError::OutsideDomain { center: x, radius: 2.0 * step });
    }
    let at = |dx: f64, dy: f64| field.value(x + Point2::new(dx, dy));
    let c = at(0.0, 0.0)?;
    let lap = (at(step, 0.0)? + at(-step, 0.0)? + at(0.0, step)? + at(0.0, -step)? - c * 4.0) / (step * step);
    let k2 = field.k() * field.k();
    let size = lap.norm() + k2 * c.norm();
    Ok(if size > 0.0 { (lap + c * k2).norm() / size } else { 0.0 })
}

/// Default number of sample points per disk.
pub const DISK_SAMPLES: usize = 10_000;

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut digit = inv;
    while i > 0 {
        out += (i % base) as f64 * digit;
        i /= base;
        digit *= inv;
    }
    out
}

/// Deterministic low-discrepancy points in the closed disk: a Halton (2, 3) sequence mapped
/// by area, plus 1/8 of the budget on the boundary circle, where sup norms of solutions sit.
pub fn disk_points(center: Point2, radius: f64, count: usize) -> Vec<Point2> {
    let rim = count / 8;
    let inner = count - rim;
    let mut pts: Vec<Point2> = (1..=inner as u64)
        .map(|i| {
            let r = radius * radical_inverse(i, 2).sqrt();
            center + Point2::from_polar(r, 2.0 * PI * radical_inverse(i, 3))
        })
        .collect();
    pts.extend((0..rim).map(|j| center + Point2::from_polar(radius, 2.0 * PI * (j as f64 + 0.5) / rim as f64)));
    pts
}

/// Sampled `‖u‖_{L∞(B_radius(center))}`.
pub fn disk_sup(field: &dyn HelmholtzField, center: Point2, radius: f64, samples: usize) -> Result<f64, SmallnessError> {
    if !field.contains_disk(center, radius) {
        return Err(SmallnessError::OutsideDomain { center, radius });
    }
    let pts = disk_points(center, radius, samples);
    Ok(field.values_in_disk(center, radius, &pts)?.iter().map(|v| v.norm()).fold(0.0, f64::max))
}

/// Radii `r₁ < r₂ < s < r₃` of a three-sphere configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRadii {
    pub r1: f64,
    pub r2: f64,
    pub s: f64,
    pub r3: f64,
}

impl SphereRadii {
    pub fn new(r1: f64, r2: f64, s: f64, r3: f64) -> Result<Self, SmallnessError> {
        if !(0.0 < r1 && r1 < r2 && r2 < s && s < r3) {
            return Err(SmallnessError::Precondition(format!("need 0 < r1 < r2 < s < r3, got {r1}, {r2}, {s}, {r3}")));
        }
        Ok(Self { r1, r2, s, r3 })
    }

    /// `(r, 2r, 3r, 4r)`: the disk of the next chain link lies in `B_{2r}`.
    pub fn chain(r: f64) -> Self {
        Self { r1: r, r2: 2.0 * r, s: 3.0 * r, r3: 4.0 * r }
    }

    /// `(1 − r₂/s)^{−3/2}`.
    pub fn gap_factor(&self) -> f64 {
        (1.0 - self.r2 / self.s).powf(-1.5)
    }

    /// Admissible `β` range `[c₁ ln(r₃/s)/ln(r₃/r₁), 1 − c₁ ln(s/r₁)/ln(r₃/r₁)]`, nonempty for `c₁ ≤ 1`.
    pub fn beta_bracket(&self, c1: f64) -> (f64, f64) {
        let total = (self.r3 / self.r1).ln();
        (c1 * (self.r3 / self.s).ln() / total, 1.0 - c1 * (self.s / self.r1).ln() / total)
    }
}

/// Sampled sup norms on the three disks about one centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSphereCheck {
    pub radii: SphereRadii,
    pub sup1: f64,
    pub sup2: f64,
    pub sup3: f64,
}

impl ThreeSphereCheck {
    /// Smallest `C` with `‖u‖_{B_{r₂}} ≤ C(1−r₂/s)^{−3/2}‖u‖^{1−β}_{B_{r₃}}‖u‖^β_{B_{r₁}}`.
    pub fn required_c(&self, beta: f64) -> f64 {
        if self.sup2 == 0.0 {
            return 0.0;
        }
        self.sup2 / (self.radii.gap_factor() * self.sup3.powf(1.0 - beta) * self.sup1.powf(beta))
    }

    /// The smallest admissible pair: `required_c` grows with `β` because `sup1 ≤ sup3`,
    /// so the pair sits at the lower end of the bracket.
    pub fn smallest_pair(&self, c1: f64) -> (f64, f64) {
        let beta = self.radii.beta_bracket(c1).0;
        (self.required_c(beta), beta)
    }

    pub fn holds(&self, c: f64, beta: f64) -> bool {
        self.sup2 <= c * self.radii.gap_factor() * self.sup3.powf(1.0 - beta) * self.sup1.powf(beta) * (1.0 + 1e-12)
    }
}

/// Sampled sup norms on `B_{r₁} ⊂ B_{r₂} ⊂ B_{r₃}`; each larger disk also counts the samples
/// of the smaller ones, so the sampled norms are nested like the true ones.
pub fn three_sphere_check(
    field: &dyn HelmholtzField,
    center: Point2,
    radii: SphereRadii,
    samples: usize,
) -> Result<ThreeSphereCheck, SmallnessError> {
    let sup3 = disk_sup(field, center, radii.r3, samples)?;
    let sup1 = disk_sup(field, center, radii.r1, samples)?;
    let sup2 = disk_sup(field, center, radii.r2, samples)?.max(sup1);
    Ok(ThreeSphereCheck { radii, sup1, sup2, sup3: sup3.max(sup2) })
}

/// One `(C, β)` fitted on a training suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSphereFit {
    pub k: f64,
    pub c: f64,
    pub beta: f64,
    pub c1: f64,
    pub training_runs: usize,
}

impl ThreeSphereFit {
    /// `β` at the lower bracket end for `c₁`, `C` the largest requirement over `checks`.
    pub fn fit(k: f64, checks: &[ThreeSphereCheck], c1: f64) -> Result<Self, SmallnessError> {
        let radii = checks.first().ok_or_else(|| SmallnessError::Precondition("no training checks".into()))?.radii;
        if !(c1 > 0.0 && c1 <= 1.0) || checks.iter().any(|c| c.radii != radii) {
            return Err(SmallnessError::Precondition("need c1 in (0, 1] and one radius set".into()));
        }
        let beta = radii.beta_bracket(c1).0;
        let c = checks.iter().map(|ch| ch.required_c(beta)).fold(0.0, f64::max);
        Ok(Self { k, c, beta, c1, training_runs: checks.len() })
    }

    /// Number of `checks` satisfying the inequality with the fitted pair.
    pub fn validate(&self, checks: &[ThreeSphereCheck]) -> usize {
        checks.iter().filter(|ch| ch.holds(self.c, self.beta)).count()
    }

    /// Raise `C` to cover `checks` as well, keeping `β`; returns how many needed it.
    pub fn refit(&mut self, checks: &[ThreeSphereCheck]) -> usize {
        let failing: Vec<f64> =
            checks.iter().filter(|ch| !ch.holds(self.c, self.beta)).map(|ch| ch.required_c(self.beta)).collect();
        self.c = failing.iter().copied().fold(self.c, f64::max);
        self.training_runs += checks.len();
        failing.len()
    }
}

/// Disks of radius `r` centred on a polyline with spacing at most `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskChain {
    pub centers: Vec<Point2>,
    pub r: f64,
    /// Length of the underlying polyline.
    pub length: f64,
}

impl DiskChain {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,cx,cy\n");
        for (i, c) in self.centers.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{}", fmt17(c.x), fmt17(c.y));
        }
        out
    }

    pub fn max_spacing(&self) -> f64 {
        self.centers.windows(2).map(|w| w[0].dist(w[1])).fold(0.0, f64::max)
    }

    /// Whether the last link (from the second-to-last centre to the end) lies in `cone`.
    pub fn approaches_within(&self, cone: &Cone) -> bool {
        match self.centers.as_slice() {
            [.., a, b] => (0..=16).all(|j| {
                let p = *a + (*b - *a) * (j as f64 / 16.0);
                p == cone.apex || cone.contains(p)
            }),
            _ => false,
        }
    }
}

/// Outcome of the independent geometric audit of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainAudit {
    /// `r < r_m/5`.
    pub radius_ok: bool,
    /// Consecutive centres at most `r` apart.
    pub spacing_ok: bool,
    /// Smallest distance from a centre to an obstacle, minus `4r`.
    pub clearance_margin: f64,
    pub inside_box: bool,
}

impl ChainAudit {
    pub fn passed(&self) -> bool {
        self.radius_ok && self.spacing_ok && self.clearance_margin > 0.0 && self.inside_box
    }
}

/// Check the chain conditions and the `4r` clearance from `obstacles` directly.
pub fn audit_chain(chain: &DiskChain, obstacles: &[Polygon], grid: &ErodedGrid, r_m: f64) -> ChainAudit {
    let four_r = 4.0 * chain.r;
    let clearance = chain
        .centers
        .iter()
        .map(|&c| {
            obstacles
                .iter()
                .map(|p| if p.contains(c) { -p.boundary_distance(c) } else { p.boundary_distance(c) })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    let inside_box = chain.centers.iter().all(|&c| {
        c.x - four_r > grid.bbox.min.x
            && c.x + four_r < grid.bbox.max.x
            && c.y - four_r > grid.bbox.min.y
            && c.y + four_r < grid.bbox.max.y
    });
    ChainAudit {
        radius_ok: chain.r < r_m / 5.0,
        spacing_ok: chain.max_spacing() <= chain.r * (1.0 + 1e-12),
        clearance_margin: clearance - four_r,
        inside_box,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Visit {
    cost: f64,
    cell: usize,
}

impl Eq for Visit {}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra on the 8-connected free cells; returns cell indices from `from` to `to`.
fn grid_path(grid: &ErodedGrid, from: (usize, usize), to: (usize, usize)) -> Option<Vec<usize>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let idx = |i: usize, j: usize| j * nx + i;
    let mut dist = vec![f64::INFINITY; nx * ny];
    let mut prev = vec![usize::MAX; nx * ny];
    let (start, goal) = (idx(from.0, from.1), idx(to.0, to.1));
    dist[start] = 0.0;
    let mut heap = BinaryHeap::from([Visit { cost: 0.0, cell: start }]);
    while let Some(Visit { cost, cell }) = heap.pop() {
        if cell == goal {
            break;
        }
        if cost > dist[cell] {
            continue;
        }
        let (i, j) = ((cell % nx) as isize, (cell / nx) as isize);
        for (di, dj) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize || !grid.free(a as usize, b as usize) {
                continue;
            }
            let next = idx(a as usize, b as usize);
            let step = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            let c = cost + step;
            if c < dist[next] {
                dist[next] = c;
                prev[next] = cell;
                heap.push(Visit { cost: c, cell: next });
            }
        }
    }
    if dist[goal].is_infinite() {
        return None;
    }
    let mut path = vec![goal];
    while *path.last()? != start {
        path.push(prev[*path.last()?]);
    }
    path.reverse();
    Some(path)
}

/// Whether the segment stays in free cells, probed every quarter cell.
fn segment_free(grid: &ErodedGrid, a: Point2, b: Point2) -> bool {
    let n = ((a.dist(b) / (0.25 * grid.step)).ceil() as usize).max(1);
    (0..=n).all(|j| {
        let p = a + (b - a) * (j as f64 / n as f64);
        grid.cell_of(p).is_some_and(|(i, j)| grid.free(i, j))
    })
}

/// Chain of disks of radius `r` from `start` to `end` through the free cells of `grid`,
/// which must be eroded by at least `4r`.
///
/// The shortest 8-connected cell path is shortened by line-of-sight pruning and resampled
/// to centre spacing at most `r`.
pub fn build_chain(grid: &ErodedGrid, start: Point2, end: Point2, r: f64) -> Result<DiskChain, SmallnessError> {
    if !(r > 0.0) || grid.r < 4.0 * r * (1.0 - 1e-12) {
        return Err(SmallnessError::Precondition(format!("grid eroded by {} but chains of radius {r} need 4r", grid.r)));
    }
    let cell = |p: Point2| grid.cell_of(p).filter(|&(i, j)| grid.free(i, j));
    let (from, to) = match (cell(start), cell(end)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SmallnessError::Precondition("end points must lie in free cells".into())),
    };
    let cells = grid_path(grid, from, to).ok_or(SmallnessError::Disconnected)?;
    let mut nodes = vec![start];
    nodes.extend(cells.iter().map(|&c| grid.cell_center(c % grid.nx, c / grid.nx)));
    nodes.push(end);
    // string pulling: jump to the farthest node in sight
    let mut polyline = vec![start];
    let mut at = 0;
    while at + 1 < nodes.len() {
        let mut next = at + 1;
        for cand in (at + 2..nodes.len()).rev() {
            if segment_free(grid, nodes[at], nodes[cand]) {
                next = cand;
                break;
            }
        }
        polyline.push(nodes[next]);
        at = next;
    }
    let length: f64 = polyline.windows(2).map(|w| w[0].dist(w[1])).sum();
    let mut centers = vec![start];
    for w in polyline.windows(2) {
        let pieces = (w[0].dist(w[1]) / r).ceil() as usize;
        for j in 1..=pieces {
            centers.push(w[0] + (w[1] - w[0]) * (j as f64 / pieces as f64));
        }
    }
    let chain = DiskChain { centers, r, length };
    if chain.max_spacing() > r * (1.0 + 1e-12) || !chain.centers.iter().all(|&c| cell(c).is_some()) {
        return Err(SmallnessError::Audit("resampled centres left the free cells or exceed spacing r".into()));
    }
    Ok(chain)
}

/// Result of propagating smallness along a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    /// `C_s ℰ m₀^{β^{d_γ/r+1}}`.
    pub bound: f64,
    pub exponent: f64,
    /// Sampled sup on the first disk, `m₀`.
    pub first_sup: f64,
    /// Sampled sup on the last disk.
    pub last_sup: f64,
    /// Largest sampled sup over the `4r` disks along the chain.
    pub envelope: f64,
}

impl Propagation {
    pub fn holds(&self) -> bool {
        self.last_sup <= self.bound
    }
}

/// `C_s ℰ m^{β^{d/r+1}}`.
pub fn propagation_bound(c_s: f64, envelope_bound: f64, first_sup: f64, beta: f64, length: f64, r: f64) -> f64 {
    c_s * envelope_bound * first_sup.powf(beta.powf(length / r + 1.0))
}

/// Propagate the sampled sup on the first disk to the last one.
///
/// `envelope_samples` points are used on each `4r` disk to check `‖w‖ ≤ ℰ` there.
pub fn propagate(
    field: &dyn HelmholtzField,
    chain: &DiskChain,
    envelope_bound: f64,
    c_s: f64,
    beta: f64,
    envelope_samples: usize,
) -> Result<Propagation, SmallnessError> {
    if !(beta > 0.0 && beta < 1.0) || !(c_s > 0.0) || chain.centers.is_empty() {
        return Err(SmallnessError::Precondition(format!("need beta in (0,1), C_s > 0 and a chain; got {beta}, {c_s}")));
    }
    let envelope = chain
        .centers
        .iter()
        .map(|&c| disk_sup(field, c, 4.0 * chain.r, envelope_samples))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if envelope > envelope_bound {
        return Err(SmallnessError::Precondition(format!("sampled sup {envelope} exceeds the envelope bound {envelope_bound}")));
    }
    let first_sup = disk_sup(field, chain.centers[0], chain.r, DISK_SAMPLES)?;
    let last_sup = disk_sup(field, *chain.centers.last().unwrap_or(&chain.centers[0]), chain.r, DISK_SAMPLES)?;
    let exponent = beta.powf(chain.length / chain.r + 1.0);
    Ok(Propagation {
        bound: c_s * envelope_bound * first_sup.powf(exponent),
        exponent,
        first_sup,
        last_sup,
        envelope,
    })
}

/// Chain radius from the near-field error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSchedule {
    /// `d_γ|ln β| / ((1−α) ln|ln ε₁|)`.
    pub r: f64,
    /// `min(r_m, h/4, ζ)`.
    pub limit: f64,
    /// `4r` equals the limit to rounding: `ε₁` sits at the admissibility ceiling.
    pub at_ceiling: bool,
}

/// Limits for the chain radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLimits {
    pub r_m: f64,
    pub h: f64,
    pub zeta: f64,
}

impl ChainLimits {
    pub fn min(&self) -> f64 {
        self.r_m.min(self.h / 4.0).min(self.zeta)
    }
}

/// `ln ε₁` form of [`radius_schedule`], for errors below the `f64` range.
pub fn radius_schedule_ln(
    ln_eps1: f64,
    length: f64,
    beta: f64,
    alpha: f64,
    limits: ChainLimits,
) -> Result<RadiusSchedule, SmallnessError> {
    if !(beta > 0.0 && beta < 1.0) || !(alpha > 0.0 && alpha < 1.0) || !(length > 0.0) {
        return Err(SmallnessError::Precondition(format!("need beta, alpha in (0,1) and d > 0; got {beta}, {alpha}, {length}")));
    }
    if !(ln_eps1 < -1.0) {
        return Err(SmallnessError::Schedule(format!("need eps1 < 1/e, got ln eps1 = {ln_eps1}")));
    }
    let r = length * beta.ln().abs() / ((1.0 - alpha) * (-ln_eps1).ln());
    let limit = limits.min();
    let at_ceiling = (4.0 * r - limit).abs() <= 1e-12 * limit;
    if 4.0 * r > limit && !at_ceiling {
        return Err(SmallnessError::Schedule(format!("4r = {} exceeds min(r_m, h/4, zeta) = {limit}; shrink eps1", 4.0 * r)));
    }
    Ok(RadiusSchedule { r, limit, at_ceiling })
}

pub fn radius_schedule(eps1: f64, length: f64, beta: f64, alpha: f64, limits: ChainLimits) -> Result<RadiusSchedule, SmallnessError> {
    if !(eps1 > 0.0) {
        return Err(SmallnessError::Schedule(format!("need eps1 > 0, got {eps1}")));
    }
    radius_schedule_ln(eps1.ln(), length, beta, alpha, limits)
}

/// `ln ε₁` at the ceiling `[exp exp(4 d_γ|ln β|/((1−α) min(r_m, h/4, ζ)))]^{−1}`.
pub fn ln_eps1_ceiling(length: f64, beta: f64, alpha: f64, limits: ChainLimits) -> f64 {
    -(4.0 * length * beta.ln().abs() / ((1.0 - alpha) * limits.min())).exp()
}

/// Scan of annuli `‖x₀‖ − ζ < |x| < ‖x₀‖ + ζ` for the near-field error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusScan {
    pub zeta: f64,
    /// Number of `‖x₀‖` values in `[R+1, 2R]`.
    pub centers: usize,
    pub rings: usize,
    pub angles: usize,
}

impl Default for AnnulusScan {
    fn default() -> Self {
        Self { zeta: 0.5, centers: 5, rings: 5, angles: 256 }
    }
}

/// Measured near-field error on the best annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearFieldError {
    pub eps1: f64,
    pub x0_norm: f64,
    pub zeta: f64,
    /// `R` with both obstacles inside `B_R`.
    pub outer_radius: f64,
}

/// `ε₁ = sup |w|` over the annulus with `‖x₀‖ ∈ [R+1, 2R]` minimizing it.
pub fn near_field_error(w: &SolutionDifference, scan: AnnulusScan) -> Result<NearFieldError, SmallnessError> {
    if scan.centers == 0 || scan.rings < 2 || scan.angles == 0 || !(scan.zeta > 0.0) {
        return Err(SmallnessError::Precondition("annulus scan needs positive sizes".into()));
    }
    let outer = w.u.polygon().max_radius().max(w.u_prime.polygon().max_radius()).max(1.0 + scan.zeta);
    let lo = outer + 1.0;
    let hi = 2.0 * outer;
    let mut best: Option<NearFieldError> = None;
    for c in 0..scan.centers {
        let x0 = if scan.centers == 1 { lo } else { lo + (hi - lo) * c as f64 / (scan.centers - 1) as f64 };
        let pts: Vec<Point2> = (0..scan.rings)
            .flat_map(|i| {
                let rad = x0 - scan.zeta + 2.0 * scan.zeta * i as f64 / (scan.rings - 1) as f64;
                (0..scan.angles).map(move |j| Point2::from_polar(rad, 2.0 * PI * j as f64 / scan.angles as f64))
            })
            .collect();
        let eps1 = w.values(&pts)?.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if best.is_none_or(|b| eps1 < b.eps1) {
            best = Some(NearFieldError { eps1, x0_norm: x0, zeta: scan.zeta, outer_radius: outer });
        }
    }
    best.ok_or_else(|| SmallnessError::Precondition("empty scan".into()))
}

/// Boundary sups of `w` on `Γ_h^±` against the near-field error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPropagation {
    pub eps: f64,
    pub near: NearFieldError,
    pub sup_w: f64,
    pub sup_grad_w: f64,
    /// `(ln|ln ε₁|)^{−1/2}`, when `ε₁ < 1/e`.
    pub shape: Option<f64>,
    /// `max(sup_w, sup_grad_w) / shape`.
    pub ratio: Option<f64>,
    /// `−ln ε₁ / (−ln ε)^{1/2}`, the constant of the near-field estimate.
    pub c_a: Option<f64>,
}

/// Boundary value and global gradient of a solution at arclength `s` on `edge`: the normal
/// derivative from the impedance condition, the tangential one by central differences.
fn edge_data(sol: &ScatterSolution, edge: usize, s: f64, h: f64) -> (Complex64, [Complex64; 2]) {
    let poly = sol.polygon();
    let u = sol.trace_at(edge, s);
    let step = 1e-5 * h;
    let du_t = (sol.trace_at(edge, s + step) - sol.trace_at(edge, s - step)) / (2.0 * step);
    let du_n = -sol.impedance.eval(poly, edge, s) * u;
    let (t, nu) = (poly.edge_tangent(edge), poly.edge_normal(edge));
    (u, [du_t * t.x + du_n * nu.x, du_t * t.y + du_n * nu.y])
}

/// Number of sample points per edge of `Γ_h^±`.
pub const BOUNDARY_SAMPLES: usize = 64;

/// Measure `w = u_K − u_{K′}` and `∇w` on the two edges of length `h` at the corner `frame` of `K`.
///
/// `eps` is the far-field error of the pair; `Γ_h^±` must stay outside `K′`.
pub fn boundary_propagation_experiment(
    sol_k: &ScatterSolution,
    sol_k2: &ScatterSolution,
    frame: &CornerFrame,
    eps: f64,
    scan: AnnulusScan,
) -> Result<BoundaryPropagation, SmallnessError> {
    let w = SolutionDifference::new(sol_k, sol_k2)?;
    let h = frame.h;
    let n = sol_k.polygon().len();
    let mut sup_w: f64 = 0.0;
    let mut sup_grad: f64 = 0.0;
    for edge in Edge::BOTH {
        let dir = edge.direction(frame);
        // Gauss-type interior points, away from the vertex and from r = h
        let rs: Vec<f64> = (0..BOUNDARY_SAMPLES).map(|j| h * (j as f64 + 0.5) / BOUNDARY_SAMPLES as f64).collect();
        let pts: Vec<Point2> = rs.iter().map(|&r| frame.vertex + frame.vec_to_global(dir) * r).collect();
        let e = match edge {
            Edge::Minus => frame.edge_minus(n),
            Edge::Plus => frame.edge_plus(n),
        };
        let along = |r: f64| if edge == Edge::Minus { r } else { frame.len_plus - r };
        let shared = sol_k2.polygon() == sol_k.polygon();
        if !shared && pts.iter().any(|&p| sol_k2.polygon().contains(p)) {
            return Err(SmallnessError::Precondition("the corner edges enter K′; reduce h".into()));
        }
        // on a shared boundary u′ comes from its own traces
        let (u2, g2): (Vec<Complex64>, Vec<[Complex64; 2]>) = if shared {
            rs.iter().map(|&r| edge_data(sol_k2, e, along(r), h)).unzip()
        } else {
            (sol_k2.evaluate_total(&pts)?, sol_k2.gradient_total(&pts)?)
        };
        for (idx, &r) in rs.iter().enumerate() {
            let (u, g) = edge_data(sol_k, e, along(r), h);
            let dw = [g[0] - g2[idx][0], g[1] - g2[idx][1]];
            sup_w = sup_w.max((u - u2[idx]).norm());
            sup_grad = sup_grad.max((dw[0].norm_sqr() + dw[1].norm_sqr()).sqrt());
        }
    }
    let near = near_field_error(&w, scan)?;
    let shape = (near.eps1 > 0.0 && near.eps1.ln() < -1.0).then(|| (-near.eps1.ln()).ln().powf(-0.5));
    let ratio = shape.map(|s| sup_w.max(sup_grad) / s);
    let c_a = (eps > 0.0 && eps < 1.0 && near.eps1 > 0.0).then(|| -near.eps1.ln() / (-eps.ln()).sqrt());
    Ok(BoundaryPropagation { eps, near, sup_w, sup_grad_w: sup_grad, shape, ratio, c_a })
}
