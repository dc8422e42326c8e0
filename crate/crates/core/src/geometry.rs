//! Convex polygons, admissibility checks, Hausdorff distance, corner frames and
//! eroded exterior grids.

use num_complex::Complex64;
use rand::Rng;
use serde::Deserialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

use crate::fmt17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite vertex coordinate at index {0}")]
    NonFinite(usize),
    #[error("degenerate polygon: vertex {0} is collinear with its neighbours or repeats")]
    Degenerate(usize),
    #[error("polygon is not strictly convex at vertex {0}")]
    NotConvex(usize),
    #[error("vertices are ordered clockwise")]
    Clockwise,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("polygon file: {0}")]
    Parse(String),
}

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn unit(self) -> Self {
        self * (1.0 / self.norm())
    }

    /// Rotation by +90°.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + ab * t)
}

/// Strictly convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

/// Relative tolerance for the turn test that separates convex from collinear.
const TURN_TOL: f64 = 1e-12;

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        let mut positive = 0;
        let mut negative = 0;
        let mut turning = 0.0;
        for i in 0..n {
            let prev = vertices[(i + n - 1) % n];
            let cur = vertices[i];
            let next = vertices[(i + 1) % n];
            let e1 = cur - prev;
            let e2 = next - cur;
            let scale = e1.norm() * e2.norm();
            if scale == 0.0 {
                return Err(GeometryError::Degenerate(i));
            }
            let c = e1.cross(e2);
            if c.abs() <= TURN_TOL * scale {
                return Err(GeometryError::Degenerate(i));
            }
            if c > 0.0 {
                positive += 1;
            } else {
                negative += 1;
            }
            turning += c.atan2(e1.dot(e2));
        }
        if negative == n {
            return Err(GeometryError::Clockwise);
        }
        if negative > 0 {
            let i = (0..n)
                .find(|&i| {
                    let prev = vertices[(i + n - 1) % n];
                    let next = vertices[(i + 1) % n];
                    (vertices[i] - prev).cross(next - vertices[i]) < 0.0
                })
                .unwrap_or(0);
            return Err(GeometryError::NotConvex(i));
        }
        debug_assert_eq!(positive, n);
        // a star-shaped self-intersecting polygon turns by a multiple of 2π larger than 2π
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return Err(GeometryError::NotConvex(0));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned square of side `side` centred at `center`.
    pub fn square(center: Point2, side: f64) -> Result<Self, GeometryError> {
        let h = 0.5 * side;
        Self::new(vec![
            center + Point2::new(-h, -h),
            center + Point2::new(h, -h),
            center + Point2::new(h, h),
            center + Point2::new(-h, h),
        ])
    }

    /// Regular `n`-gon with circumradius `radius`, first vertex at angle `phase`.
    pub fn regular(n: usize, center: Point2, radius: f64, phase: f64) -> Result<Self, GeometryError> {
        Self::new(
            (0..n)
                .map(|i| center + Point2::from_polar(radius, phase + 2.0 * PI * i as f64 / n as f64))
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i % self.len()]
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        a.dist(b)
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.edge_length(i)).collect()
    }

    /// Unit tangent of edge `i`.
    pub fn edge_tangent(&self, i: usize) -> Point2 {
        let (a, b) = self.edge(i);
        (b - a).unit()
    }

    /// Outward unit normal of edge `i`.
    pub fn edge_normal(&self, i: usize) -> Point2 {
        let t = self.edge_tangent(i);
        Point2::new(t.y, -t.x)
    }

    /// Interior angle at vertex `i`.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.len();
        let v = self.vertex(i);
        let to_next = self.vertex(i + 1) - v;
        let to_prev = self.vertex(i + n - 1) - v;
        to_next.cross(to_prev).atan2(to_next.dot(to_prev))
    }

    pub fn interior_angles(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.interior_angle(i)).collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.edge_lengths().iter().sum()
    }

    pub fn area(&self) -> f64 {
        0.5 * (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.cross(b)
            })
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..self.len() {
            let (p, q) = self.edge(i);
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Largest distance of a vertex from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// Closed containment.
    pub fn contains(&self, p: Point2) -> bool {
        (0..self.len()).all(|i| {
            let (a, b) = self.edge(i);
            (b - a).cross(p - a) >= -1e-14 * (b - a).norm()
        })
    }

    /// Open containment (strict interior).
    pub fn contains_strict(&self, p: Point2) -> bool {
        (0..self.len()).all(|i| {
            let (a, b) = self.edge(i);
            (b - a).cross(p - a) > 0.0
        })
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                point_segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the closed polygon (zero inside).
    pub fn distance(&self, p: Point2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    /// Boundary point at arclength `s` (taken modulo the perimeter), with its edge index
    /// and the arclength along that edge.
    pub fn point_at_arclength(&self, s: f64) -> (usize, f64, Point2) {
        let per = self.perimeter();
        let mut s = s.rem_euclid(per);
        for i in 0..self.len() {
            let l = self.edge_length(i);
            if s <= l || i + 1 == self.len() {
                let s = s.min(l);
                let (a, _) = self.edge(i);
                return (i, s, a + self.edge_tangent(i) * s);
            }
            s -= l;
        }
        unreachable!("perimeter walk always terminates")
    }

    pub fn map_vertices(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, GeometryError> {
        Self::new(self.vertices.iter().map(|&v| f(v)).collect())
    }

    pub fn translated(&self, v: Point2) -> Result<Self, GeometryError> {
        self.map_vertices(|p| p + v)
    }

    pub fn scaled_about(&self, center: Point2, factor: f64) -> Result<Self, GeometryError> {
        self.map_vertices(|p| center + (p - center) * factor)
    }

    pub fn rotated_about(&self, center: Point2, angle: f64) -> Result<Self, GeometryError> {
        self.map_vertices(|p| center + (p - center).rotate(angle))
    }

    pub fn with_vertex_moved(&self, i: usize, delta: Point2) -> Result<Self, GeometryError> {
        let mut v = self.vertices.clone();
        let n = v.len();
        v[i % n] = v[i % n] + delta;
        Self::new(v)
    }
}

/// Random strictly convex polygon: `n` vertices at sorted random angles on a
/// circle of radius `radius` about `center`, with a minimum angular gap.
pub fn random_convex_polygon<R: Rng>(rng: &mut R, n: usize, center: Point2, radius: f64) -> Polygon {
    loop {
        let gap = 2.0 * PI / n as f64 * 0.35;
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
        angles.sort_by(f64::total_cmp);
        let ok = (0..n).all(|i| {
            let next = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * PI };
            next - angles[i] > gap
        });
        if !ok {
            continue;
        }
        let r_scale = 0.85 + 0.15 * rng.gen::<f64>();
        if let Ok(p) = Polygon::new(
            angles
                .iter()
                .map(|&a| center + Point2::from_polar(radius * r_scale, a))
                .collect(),
        ) {
            return p;
        }
    }
}

/// Hausdorff distance between two closed convex polygons.
///
/// For convex sets the supremum of `dist(·, K')` over `K` is attained at a vertex of `K`.
pub fn hausdorff_distance(a: &Polygon, b: &Polygon) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// `sup_{x ∈ a} dist(x, b)`.
pub fn directed_hausdorff(a: &Polygon, b: &Polygon) -> f64 {
    a.vertices().iter().map(|&v| b.distance(v)).fold(0.0, f64::max)
}

/// Index of the vertex of `a` farthest from `b`, lowest index on ties, with that distance.
pub fn extremal_vertex(a: &Polygon, b: &Polygon) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in a.vertices().iter().enumerate() {
        let d = b.distance(v);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// A-priori parameters of the admissible class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleParams {
    pub ell_min: f64,
    pub ell_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub radius: f64,
    pub r_m: f64,
    pub delta: f64,
    pub cone_angle: f64,
}

impl AdmissibleParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ell_min: f64,
        ell_max: f64,
        theta_min: f64,
        theta_max: f64,
        radius: f64,
        r_m: f64,
        delta: f64,
        cone_angle: f64,
    ) -> Result<Self, GeometryError> {
        let p = Self { ell_min, ell_max, theta_min, theta_max, radius, r_m, delta, cone_angle };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidParams(m.to_string()));
        if !(self.ell_min > 0.0 && self.ell_min <= self.ell_max) {
            return bad("need 0 < ell_min <= ell_max");
        }
        if !(0.0 < self.theta_min && self.theta_min < self.theta_max && self.theta_max < 2.0 * PI) {
            return bad("need 0 < theta_min < theta_max < 2π");
        }
        if !(self.radius > 0.0 && self.r_m > 0.0 && self.delta > 0.0) {
            return bad("R, r_m and delta must be positive");
        }
        if !(self.cone_angle > 0.0 && self.cone_angle < PI) {
            return bad("cone angle must lie in (0, π)");
        }
        Ok(())
    }
}

/// Outcome of a single admissibility item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Untested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub item: u8,
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub items: Vec<CheckItem>,
}

impl ValidationReport {
    /// True when no item failed (untested items do not count against).
    pub fn passed(&self) -> bool {
        self.items.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn status(&self, item: u8) -> Option<CheckStatus> {
        self.items
            .iter()
            .filter(|c| c.item == item)
            .map(|c| c.status)
            .reduce(|a, b| if a == CheckStatus::Fail || b == CheckStatus::Fail { CheckStatus::Fail } else { a })
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    fn push(&mut self, item: u8, name: &'static str, ok: bool, detail: String) {
        let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        self.items.push(CheckItem { item, name, status, detail });
    }
}

/// Boundary points sampled for the exterior cone test.
const CONE_BOUNDARY_SAMPLES: usize = 64;
/// Candidate cone axes per boundary point.
const CONE_DIRECTIONS: usize = 128;
/// Erosion radii tested for the connectivity item, as fractions of `r_m`.
const EROSION_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.9];

/// Check the seven admissibility items for `poly`.
pub fn validate_admissible(poly: &Polygon, params: &AdmissibleParams) -> Result<ValidationReport, GeometryError> {
    params.check()?;
    let mut report = ValidationReport::default();

    let max_r = poly.max_radius();
    report.push(
        1,
        "containment",
        max_r <= params.radius,
        format!("max vertex radius {max_r:.6} against R = {}", params.radius),
    );

    report.push(2, "convexity", true, "strictly convex, counterclockwise".into());

    let lengths = poly.edge_lengths();
    let (lmin, lmax) = min_max(&lengths);
    report.push(
        3,
        "edge lengths",
        lmin >= params.ell_min && lmax <= params.ell_max,
        format!("edges in [{lmin:.6}, {lmax:.6}] against [{}, {}]", params.ell_min, params.ell_max),
    );

    let angles = poly.interior_angles();
    let (amin, amax) = min_max(&angles);
    report.push(
        4,
        "opening angles",
        amin >= params.theta_min && amax <= params.theta_max,
        format!("angles in [{amin:.6}, {amax:.6}] against [{}, {}]", params.theta_min, params.theta_max),
    );

    let mut connected = true;
    let mut detail = String::new();
    for frac in EROSION_FRACTIONS {
        let r = frac * params.r_m;
        let margin = 4.0 * r + 0.05 * poly.diameter();
        let bbox = Rect::around(poly, margin);
        let grid = eroded_exterior(std::slice::from_ref(poly), r, bbox, r / 8.0)?;
        let ok = !grid.is_empty() && grid.is_connected();
        connected &= ok;
        let _ = write!(detail, "r={r:.4}:{} ", if ok { "connected" } else { "split" });
    }
    report.push(5, "eroded exterior connectivity", connected, detail.trim_end().to_string());

    let (cone_ok, worst) = exterior_cone_check(poly, params.delta, params.cone_angle);
    report.push(
        6,
        "exterior cone",
        cone_ok,
        if cone_ok {
            format!("{CONE_BOUNDARY_SAMPLES} boundary points each admit a common exterior cone")
        } else {
            format!("no admissible cone axis at boundary arclength {worst:.6}")
        },
    );
    report.items.push(CheckItem {
        item: 6,
        name: "interior cone branch",
        status: CheckStatus::Untested,
        detail: "only the exterior branch is checked".into(),
    });

    report.push(7, "Lipschitz boundary", true, "polygonal boundary".into());
    Ok(report)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Sampled uniform exterior cone test. Returns success and, on failure, the
/// arclength of the first boundary point without a valid axis.
fn exterior_cone_check(poly: &Polygon, delta: f64, angle: f64) -> (bool, f64) {
    let per = poly.perimeter();
    // Cone samples: 4 radii times 8 angles spanning the closed half-amplitude.
    let cone_pts: Vec<(f64, f64)> = (0..4)
        .flat_map(|i| {
            let r = delta * [0.25, 0.5, 0.75, 0.999][i];
            (0..8).map(move |j| (r, -0.5 * angle + angle * j as f64 / 7.0))
        })
        .collect();
    let offsets = [-0.99, -0.5, 0.0, 0.5, 0.99];
    for b in 0..CONE_BOUNDARY_SAMPLES {
        let s = per * b as f64 / CONE_BOUNDARY_SAMPLES as f64;
        let (_, _, x) = poly.point_at_arclength(s);
        let neighbours: Vec<Point2> = offsets
            .iter()
            .map(|&o| poly.point_at_arclength(s + o * delta).2)
            .filter(|y| y.dist(x) < delta)
            .collect();
        let found = (0..CONE_DIRECTIONS).any(|d| {
            let axis = 2.0 * PI * d as f64 / CONE_DIRECTIONS as f64;
            neighbours.iter().all(|&y| {
                cone_pts
                    .iter()
                    .all(|&(r, a)| !poly.contains(y + Point2::from_polar(r, axis + a)))
            })
        });
        if !found {
            return (false, s);
        }
    }
    (true, 0.0)
}

/// Open cone with apex, axis, radius and full amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub apex: Point2,
    pub axis: Point2,
    pub radius: f64,
    pub amplitude: f64,
}

impl Cone {
    pub fn new(apex: Point2, axis: Point2, radius: f64, amplitude: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !(amplitude > 0.0 && amplitude < 2.0 * PI) || axis.norm() == 0.0 {
            return Err(GeometryError::InvalidParams("cone needs radius > 0, amplitude in (0, 2π), nonzero axis".into()));
        }
        Ok(Self { apex, axis: axis.unit(), radius, amplitude })
    }

    pub fn contains(&self, y: Point2) -> bool {
        let d = y - self.apex;
        let r = d.norm();
        if !(r > 0.0 && r < self.radius) {
            return false;
        }
        let cos_angle = (d.dot(self.axis) / r).clamp(-1.0, 1.0);
        cos_angle.acos() <= 0.5 * self.amplitude + 1e-15
    }
}

/// Local frame at a polygon corner: the edge towards the next vertex lies on the
/// positive first axis and the edge towards the previous vertex at angle `theta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerFrame {
    pub vertex_index: usize,
    pub vertex: Point2,
    /// Interior opening angle.
    pub theta0: f64,
    /// Global direction of the local first axis.
    pub axis: Point2,
    pub h: f64,
    /// Length of the edge on the first axis.
    pub len_minus: f64,
    /// Length of the edge at angle `theta0`.
    pub len_plus: f64,
}

impl CornerFrame {
    /// Global to local coordinates.
    pub fn to_local(&self, p: Point2) -> Point2 {
        let d = p - self.vertex;
        Point2::new(d.dot(self.axis), self.axis.cross(d))
    }

    /// Local to global coordinates.
    pub fn to_global(&self, q: Point2) -> Point2 {
        self.vertex + self.axis * q.x + self.axis.perp() * q.y
    }

    /// Local vector to global vector (rotation only).
    pub fn vec_to_global(&self, q: Point2) -> Point2 {
        self.axis * q.x + self.axis.perp() * q.y
    }

    /// Global vector to local vector.
    pub fn vec_to_local(&self, v: Point2) -> Point2 {
        Point2::new(v.dot(self.axis), self.axis.cross(v))
    }

    /// Exterior normal of the edge at angle `theta0`: `(-sin θ0, cos θ0)`.
    pub fn normal_plus(&self) -> Point2 {
        Point2::new(-self.theta0.sin(), self.theta0.cos())
    }

    /// Exterior normal of the edge on the first axis: `(0, -1)`.
    pub fn normal_minus(&self) -> Point2 {
        Point2::new(0.0, -1.0)
    }

    /// Local unit direction of the edge at angle `theta0`.
    pub fn dir_plus(&self) -> Point2 {
        Point2::from_polar(1.0, self.theta0)
    }

    /// Local unit direction of the edge on the first axis.
    pub fn dir_minus(&self) -> Point2 {
        Point2::new(1.0, 0.0)
    }

    /// Polygon index of the edge on the first axis (from this vertex to the next).
    pub fn edge_minus(&self, n: usize) -> usize {
        self.vertex_index % n
    }

    /// Polygon index of the edge at angle `theta0` (from the previous vertex to this one).
    pub fn edge_plus(&self, n: usize) -> usize {
        (self.vertex_index + n - 1) % n
    }

    /// Whether the local point lies in the closed truncated sector `Q_h`.
    pub fn in_sector(&self, q: Point2) -> bool {
        let r = q.norm();
        if r > self.h {
            return false;
        }
        if r == 0.0 {
            return true;
        }
        let a = q.angle();
        (-1e-14..=self.theta0 + 1e-14).contains(&a)
    }
}

/// Build the corner frame at vertex `i` with truncation radius `h`.
pub fn corner_frame(poly: &Polygon, i: usize, h: f64) -> Result<CornerFrame, GeometryError> {
    let n = poly.len();
    let i = i % n;
    let len_minus = poly.edge_length(i);
    let len_plus = poly.edge_length(i + n - 1);
    if !(h > 0.0 && h < len_minus.min(len_plus)) {
        return Err(GeometryError::Precondition(format!(
            "h = {h} must lie in (0, {}) at vertex {i}",
            len_minus.min(len_plus)
        )));
    }
    Ok(CornerFrame {
        vertex_index: i,
        vertex: poly.vertex(i),
        theta0: poly.interior_angle(i),
        axis: poly.edge_tangent(i),
        h,
        len_minus,
        len_plus,
    })
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Result<Self, GeometryError> {
        if !(min.x < max.x && min.y < max.y) {
            return Err(GeometryError::InvalidParams("rectangle corners out of order".into()));
        }
        Ok(Self { min, max })
    }

    /// Square `[-half, half]²`.
    pub fn centered_square(half: f64) -> Self {
        Self { min: Point2::new(-half, -half), max: Point2::new(half, half) }
    }

    /// Bounding box of `poly` grown by `margin`.
    pub fn around(poly: &Polygon, margin: f64) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for v in poly.vertices() {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        Self { min: lo - Point2::new(margin, margin), max: hi + Point2::new(margin, margin) }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn edge_distance(&self, p: Point2) -> f64 {
        (p.x - self.min.x).min(self.max.x - p.x).min(p.y - self.min.y).min(self.max.y - p.y)
    }
}

/// Occupancy grid of the eroded exterior `{x : dist(x, ∂G) > r}` where `G` is the
/// box minus the obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct ErodedGrid {
    pub bbox: Rect,
    pub step: f64,
    pub r: f64,
    pub nx: usize,
    pub ny: usize,
    cells: Vec<bool>,
}

impl ErodedGrid {
    pub fn free(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.bbox.min.x + (i as f64 + 0.5) * self.step,
            self.bbox.min.y + (j as f64 + 0.5) * self.step,
        )
    }

    /// Cell containing `p`, if inside the box.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.bbox.contains(p) {
            return None;
        }
        let i = (((p.x - self.bbox.min.x) / self.step) as usize).min(self.nx - 1);
        let j = (((p.y - self.bbox.min.y) / self.step) as usize).min(self.ny - 1);
        Some((i, j))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        self.free_count() == 0
    }

    /// Component labels under 8-connectivity (`usize::MAX` for blocked cells) and the count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.cells.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = ((c % self.nx) as isize, (c / self.nx) as isize);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= self.nx as isize || b >= self.ny as isize {
                            continue;
                        }
                        let idx = b as usize * self.nx + a as usize;
                        if self.cells[idx] && label[idx] == usize::MAX {
                            label[idx] = count;
                            stack.push(idx);
                        }
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// True when the free cells form a single 8-connected component.
    pub fn is_connected(&self) -> bool {
        self.components().1 == 1
    }
}

/// Eroded exterior of the union of `obstacles` inside `bbox`.
pub fn eroded_exterior(obstacles: &[Polygon], r: f64, bbox: Rect, grid_step: f64) -> Result<ErodedGrid, GeometryError> {
    if !(r > 0.0) || !(grid_step > 0.0 && grid_step < r / 4.0) {
        return Err(GeometryError::Precondition(format!(
            "need r > 0 and 0 < grid_step < r/4, got r = {r}, step = {grid_step}"
        )));
    }
    let nx = ((bbox.max.x - bbox.min.x) / grid_step).ceil() as usize;
    let ny = ((bbox.max.y - bbox.min.y) / grid_step).ceil() as usize;
    if nx.saturating_mul(ny) > 50_000_000 {
        return Err(GeometryError::Precondition(format!("grid of {nx}x{ny} cells is too large")));
    }
    let mut grid = ErodedGrid { bbox, step: grid_step, r, nx, ny, cells: vec![false; nx * ny] };
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.cell_center(i, j);
            let free = grid.bbox.edge_distance(c) > r
                && obstacles.iter().all(|k| !k.contains(c) && k.boundary_distance(c) > r);
            grid.cells[j * nx + i] = free;
        }
    }
    Ok(grid)
}

/// Impedance values: a constant or samples on a uniform arclength grid per edge.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpedanceKind {
    Constant(Complex64),
    /// `samples[e][j]` sits at arclength `j/(m-1)·ℓ_e` along edge `e`.
    Sampled(Vec<Vec<Complex64>>),
}

/// Impedance together with its a-priori bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceParam {
    pub kind: ImpedanceKind,
    /// Sup bound on `|η|`.
    pub m1: f64,
    /// Hölder constant.
    pub m2: f64,
    /// Hölder exponent in `(0, 1]`.
    pub alpha0: f64,
}

impl ImpedanceParam {
    pub fn constant(eta: Complex64) -> Self {
        Self { kind: ImpedanceKind::Constant(eta), m1: eta.norm(), m2: 0.0, alpha0: 1.0 }
    }

    pub fn sampled(samples: Vec<Vec<Complex64>>, m1: f64, m2: f64, alpha0: f64) -> Result<Self, GeometryError> {
        if samples.iter().any(|s| s.len() < 2) {
            return Err(GeometryError::InvalidParams("each edge needs at least two impedance samples".into()));
        }
        if !(alpha0 > 0.0 && alpha0 <= 1.0) || m1 < 0.0 || m2 < 0.0 {
            return Err(GeometryError::InvalidParams("need m1, m2 >= 0 and alpha0 in (0, 1]".into()));
        }
        Ok(Self { kind: ImpedanceKind::Sampled(samples), m1, m2, alpha0 })
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        match self.kind {
            ImpedanceKind::Constant(c) => Some(c),
            ImpedanceKind::Sampled(_) => None,
        }
    }

    /// `η` at arclength `s` along edge `edge` of `poly`.
    pub fn eval(&self, poly: &Polygon, edge: usize, s: f64) -> Complex64 {
        match &self.kind {
            ImpedanceKind::Constant(c) => *c,
            ImpedanceKind::Sampled(samples) => {
                let e = edge % poly.len();
                let vals = &samples[e];
                let m = vals.len();
                let u = (s / poly.edge_length(e)).clamp(0.0, 1.0) * (m - 1) as f64;
                let j = (u.floor() as usize).min(m - 2);
                let f = u - j as f64;
                vals[j] * (1.0 - f) + vals[j + 1] * f
            }
        }
    }

    /// Admissibility of the impedance on `poly`: sign, sup bound and discrete Hölder bound.
    pub fn validate(&self, poly: &Polygon) -> ValidationReport {
        let mut report = ValidationReport::default();
        let pts: Vec<(Point2, Complex64)> = match &self.kind {
            ImpedanceKind::Constant(c) => vec![(poly.vertex(0), *c)],
            ImpedanceKind::Sampled(samples) => {
                if samples.len() != poly.len() {
                    report.push(0, "sample layout", false, format!("{} edge lists for {} edges", samples.len(), poly.len()));
                    return report;
                }
                samples
                    .iter()
                    .enumerate()
                    .flat_map(|(e, vals)| {
                        let (a, b) = poly.edge(e);
                        let m = vals.len();
                        vals.iter()
                            .enumerate()
                            .map(move |(j, &v)| (a + (b - a) * (j as f64 / (m - 1) as f64), v))
                    })
                    .collect()
            }
        };
        let min_re = pts.iter().map(|p| p.1.re).fold(f64::INFINITY, f64::min);
        report.push(1, "nonnegative real part", min_re >= 0.0, format!("min Re eta = {min_re}"));
        let sup = pts.iter().map(|p| p.1.norm()).fold(0.0, f64::max);
        report.push(2, "sup bound", sup <= self.m1 * (1.0 + 1e-12), format!("sup |eta| = {sup} against M1 = {}", self.m1));
        let mut worst: f64 = 0.0;
        for (i, &(x, a)) in pts.iter().enumerate() {
            for &(y, b) in &pts[i + 1..] {
                let d = x.dist(y);
                if d > 0.0 {
                    worst = worst.max((a - b).norm() / d.powf(self.alpha0));
                } else if (a - b).norm() > 1e-12 {
                    worst = f64::INFINITY;
                }
            }
        }
        report.push(3, "Hölder bound", worst <= self.m2 * (1.0 + 1e-12) + 1e-12, format!("max quotient {worst} against M2 = {}", self.m2));
        report
    }
}

/// Contents of a polygon file.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonFile {
    pub polygon: Polygon,
    pub impedance: Option<ImpedanceParam>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolygonFile {
    vertices: Vec<[f64; 2]>,
    impedance: Option<RawImpedance>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImpedance {
    constant: Option<[f64; 2]>,
    samples: Option<Vec<Vec<[f64; 2]>>>,
    m1: Option<f64>,
    m2: Option<f64>,
    alpha0: Option<f64>,
}

impl PolygonFile {
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let raw: RawPolygonFile = toml::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        let polygon = Polygon::new(raw.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect())?;
        let impedance = raw.impedance.map(|imp| imp.into_param()).transpose()?;
        Ok(Self { polygon, impedance })
    }

    /// Serialise with 17 significant digits per coordinate.
    pub fn to_text(&self) -> String {
        let mut s = String::from("vertices = [");
        for (i, v) in self.polygon.vertices().iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "[{}, {}]", fmt17(v.x), fmt17(v.y));
        }
        s.push_str("]\n");
        if let Some(imp) = &self.impedance {
            s.push_str("\n[impedance]\n");
            match &imp.kind {
                ImpedanceKind::Constant(c) => {
                    let _ = writeln!(s, "constant = [{}, {}]", fmt17(c.re), fmt17(c.im));
                }
                ImpedanceKind::Sampled(samples) => {
                    s.push_str("samples = [");
                    for (e, vals) in samples.iter().enumerate() {
                        if e > 0 {
                            s.push_str(", ");
                        }
                        s.push('[');
                        for (j, v) in vals.iter().enumerate() {
                            if j > 0 {
                                s.push_str(", ");
                            }
                            let _ = write!(s, "[{}, {}]", fmt17(v.re), fmt17(v.im));
                        }
                        s.push(']');
                    }
                    s.push_str("]\n");
                }
            }
            let _ = writeln!(s, "m1 = {}\nm2 = {}\nalpha0 = {}", fmt17(imp.m1), fmt17(imp.m2), fmt17(imp.alpha0));
        }
        s
    }
}

impl RawImpedance {
    fn into_param(self) -> Result<ImpedanceParam, GeometryError> {
        match (self.constant, self.samples) {
            (Some(c), None) => {
                let mut p = ImpedanceParam::constant(Complex64::new(c[0], c[1]));
                if let Some(m1) = self.m1 {
                    p.m1 = m1;
                }
                if let Some(m2) = self.m2 {
                    p.m2 = m2;
                }
                if let Some(a) = self.alpha0 {
                    p.alpha0 = a;
                }
                Ok(p)
            }
            (None, Some(samples)) => {
                let vals: Vec<Vec<Complex64>> = samples
                    .into_iter()
                    .map(|e| e.into_iter().map(|v| Complex64::new(v[0], v[1])).collect())
                    .collect();
                let sup = vals.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
                ImpedanceParam::sampled(vals, self.m1.unwrap_or(sup), self.m2.unwrap_or(0.0), self.alpha0.unwrap_or(1.0))
            }
            _ => Err(GeometryError::Parse("impedance needs exactly one of `constant` or `samples`".into())),
        }
    }
}
