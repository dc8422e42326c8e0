//! Graded Gauss–Legendre panels on a polygon boundary.

use std::sync::Arc;

use crate::geometry::{Point2, Polygon};
use crate::quadrature::{barycentric_weights, lagrange_basis, GaussLegendre};

use super::SolverError;

/// Mesh resolution controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshControl {
    /// Panels on each half edge (corner to midpoint).
    pub panels_per_half_edge: usize,
    /// Gauss nodes per panel.
    pub order: usize,
    /// Panel breakpoints sit at `(j/n)^grading` of the half edge.
    pub grading: f64,
}

impl Default for MeshControl {
    fn default() -> Self {
        Self { panels_per_half_edge: 8, order: 16, grading: 3.0 }
    }
}

impl MeshControl {
    pub fn with_panels(panels_per_half_edge: usize) -> Self {
        Self { panels_per_half_edge, ..Self::default() }
    }

    /// Twice as many panels.
    pub fn refined(self) -> Self {
        Self { panels_per_half_edge: 2 * self.panels_per_half_edge, ..self }
    }

    pub fn check(&self) -> Result<(), SolverError> {
        if self.panels_per_half_edge == 0 {
            return Err(SolverError::Validation("panels_per_half_edge must be positive".into()));
        }
        if self.order < 8 {
            return Err(SolverError::Validation(format!(
                "panel order {} too low: an edge needs at least 16 nodes",
                self.order
            )));
        }
        if !(self.grading.is_finite() && self.grading >= 1.0) {
            return Err(SolverError::Validation(format!("grading exponent {} must be >= 1", self.grading)));
        }
        Ok(())
    }
}

/// A straight boundary panel; arclength parameters are measured along its edge.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub edge: usize,
    pub s0: f64,
    pub s1: f64,
    pub a: Point2,
    pub b: Point2,
    /// Outward unit normal.
    pub normal: Point2,
    pub length: f64,
    /// Index of the panel's first node.
    pub first_node: usize,
}

impl Panel {
    /// Point at reference parameter `t ∈ [-1, 1]`.
    pub fn point(&self, t: f64) -> Point2 {
        self.a + (self.b - self.a) * (0.5 * (t + 1.0))
    }

    /// Reference parameter of the orthogonal projection of `x` onto the panel's line.
    pub fn project(&self, x: Point2) -> f64 {
        let d = self.b - self.a;
        2.0 * (x - self.a).dot(d) / (self.length * self.length) - 1.0
    }

    pub fn distance(&self, x: Point2) -> f64 {
        crate::geometry::point_segment_distance(x, self.a, self.b)
    }
}

/// Boundary discretization: panels, nodes, weights and normals.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub polygon: Arc<Polygon>,
    pub control: MeshControl,
    pub panels: Vec<Panel>,
    pub nodes: Vec<Point2>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point2>,
    /// Panel owning each node.
    pub node_panel: Vec<usize>,
    /// Arclength of each node along its edge.
    pub node_arclength: Vec<f64>,
    /// Gauss rule on `[-1, 1]` shared by all panels.
    pub rule: GaussLegendre,
    pub bary: Vec<f64>,
    /// First panel of each edge.
    edge_first_panel: Vec<usize>,
}

impl BoundaryMesh {
    pub fn new(polygon: Arc<Polygon>, control: MeshControl) -> Result<Self, SolverError> {
        control.check()?;
        let rule = GaussLegendre::new(control.order);
        let bary = barycentric_weights(&rule.nodes);
        let n_half = control.panels_per_half_edge;
        let mut panels = Vec::new();
        let mut edge_first_panel = Vec::with_capacity(polygon.len());
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut normals = Vec::new();
        let mut node_panel = Vec::new();
        let mut node_arclength = Vec::new();
        for e in 0..polygon.len() {
            edge_first_panel.push(panels.len());
            let (va, vb) = polygon.edge(e);
            let len = polygon.edge_length(e);
            let tangent = polygon.edge_tangent(e);
            let normal = polygon.edge_normal(e);
            let half = 0.5 * len;
            // breakpoints graded toward both ends
            let mut breaks: Vec<f64> = (0..=n_half)
                .map(|j| half * (j as f64 / n_half as f64).powf(control.grading))
                .collect();
            breaks.extend((0..n_half).rev().map(|j| len - half * (j as f64 / n_half as f64).powf(control.grading)));
            breaks[2 * n_half] = len;
            for w in breaks.windows(2) {
                let (s0, s1) = (w[0], w[1]);
                let a = if s0 == 0.0 { va } else { va + tangent * s0 };
                let b = if s1 == len { vb } else { va + tangent * s1 };
                let panel = Panel { edge: e, s0, s1, a, b, normal, length: s1 - s0, first_node: nodes.len() };
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    nodes.push(panel.point(t));
                    weights.push(0.5 * panel.length * w);
                    normals.push(normal);
                    node_panel.push(panels.len());
                    node_arclength.push(s0 + 0.5 * (t + 1.0) * panel.length);
                }
                panels.push(panel);
            }
        }
        Ok(Self {
            polygon,
            control,
            panels,
            nodes,
            weights,
            normals,
            node_panel,
            node_arclength,
            rule,
            bary,
            edge_first_panel,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    /// Panels belonging to edge `e`.
    pub fn edge_panels(&self, e: usize) -> std::ops::Range<usize> {
        let start = self.edge_first_panel[e];
        let end = self.edge_first_panel.get(e + 1).copied().unwrap_or(self.panels.len());
        start..end
    }

    /// Panel containing arclength `s` on edge `e`, with the reference parameter.
    pub fn locate(&self, e: usize, s: f64) -> (usize, f64) {
        let range = self.edge_panels(e);
        let idx = range
            .clone()
            .find(|&p| s <= self.panels[p].s1)
            .unwrap_or(range.end - 1);
        let p = &self.panels[idx];
        let t = (2.0 * (s - p.s0) / p.length - 1.0).clamp(-1.0, 1.0);
        (idx, t)
    }

    /// Interpolate nodal values on a panel at reference parameter `t`.
    pub fn interpolate<T>(&self, values: &[T], panel: usize, t: f64) -> T
    where
        T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        let q = self.order();
        let mut basis = vec![0.0; q];
        lagrange_basis(&self.rule.nodes, &self.bary, t, &mut basis);
        let first = self.panels[panel].first_node;
        values[first..first + q].iter().zip(&basis).map(|(&v, &l)| v * l).sum()
    }

    /// Smallest distance between consecutive nodes on the same panel, per panel.
    pub fn node_spacing(&self, panel: usize) -> f64 {
        let q = self.order();
        let mid = q / 2;
        let r = &self.rule.nodes;
        0.5 * self.panels[panel].length * (r[mid] - r[mid - 1])
    }
}
