use num_complex::Complex64;
use serde::Deserialize;
use std::path::PathBuf;

use super::LabError;
use crate::direct_solver::{IncidentWave, MeshControl};
use crate::geometry::{validate_admissible, AdmissibleParams, ImpedanceParam, Point2, Polygon};
use crate::smallness::AnnulusScan;

/// Perturbation applied to the base configuration with magnitude `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyMode {
    /// Move one vertex outward from the centroid by `t`.
    VertexShift,
    /// Scale about the centroid by `1 + t`.
    UniformScale,
    /// Rotate about the centroid by `t` radians.
    Rotate,
    /// Same polygon, impedance `η + t`.
    ImpedanceShift,
}

impl FamilyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::VertexShift => "vertex-shift",
            Self::UniformScale => "uniform-scale",
            Self::Rotate => "rotate",
            Self::ImpedanceShift => "impedance-shift",
        }
    }

    pub fn moves_shape(self) -> bool {
        self != Self::ImpedanceShift
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub mode: FamilyMode,
    pub magnitudes: Vec<f64>,
    /// Vertex moved by `vertex-shift`.
    #[serde(default)]
    pub vertex: usize,
}

/// Corner and near-field measurement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub scan: AnnulusScan,
    /// Relative threshold of the vanishing-order estimate.
    pub order_tol: f64,
    pub n_max: usize,
    /// Exponent `β` of the boundary lower bound, in `(0, 1/2)`.
    pub boundary_beta: f64,
    /// Radial and angular cells of the polar grids for the `L²` norms.
    pub l2_grid: (usize, usize),
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { scan: AnnulusScan::default(), order_tol: 1e-6, n_max: 8, boundary_beta: 0.25, l2_grid: (24, 96) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub csv: String,
    pub svg: String,
    pub ledger: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), csv: "sweep.csv".into(), svg: "sweep.svg".into(), ledger: "ledger.toml".into() }
    }
}

impl OutputPaths {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }

    pub fn svg_path(&self) -> PathBuf {
        self.dir.join(&self.svg)
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.dir.join(&self.ledger)
    }
}

/// A validated experiment: base obstacle and impedance, incident wave, family and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub polygon: Polygon,
    pub impedance: Complex64,
    pub k: f64,
    pub direction: Point2,
    pub family: FamilySpec,
    pub mesh: MeshControl,
    pub far_field_samples: usize,
    pub probe: ProbeSettings,
    pub output: OutputPaths,
    pub seed: u64,
    pub admissible: Option<AdmissibleParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    k: f64,
    direction: [f64; 2],
    impedance: [f64; 2],
    #[serde(default = "default_far_field_samples")]
    far_field_samples: usize,
    polygon: RawPolygon,
    family: FamilySpec,
    #[serde(default)]
    mesh: RawMesh,
    #[serde(default)]
    probe: RawProbe,
    #[serde(default)]
    output: RawOutput,
    admissible: Option<RawAdmissible>,
}

fn default_far_field_samples() -> usize {
    256
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolygon {
    vertices: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMesh {
    panels_per_half_edge: usize,
    order: usize,
    grading: f64,
}

impl Default for RawMesh {
    fn default() -> Self {
        let m = MeshControl::default();
        Self { panels_per_half_edge: m.panels_per_half_edge, order: m.order, grading: m.grading }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawProbe {
    zeta: f64,
    centers: usize,
    rings: usize,
    angles: usize,
    order_tol: f64,
    n_max: usize,
    boundary_beta: f64,
    l2_radial: usize,
    l2_angular: usize,
}

impl Default for RawProbe {
    fn default() -> Self {
        let p = ProbeSettings::default();
        Self {
            zeta: p.scan.zeta,
            centers: p.scan.centers,
            rings: p.scan.rings,
            angles: p.scan.angles,
            order_tol: p.order_tol,
            n_max: p.n_max,
            boundary_beta: p.boundary_beta,
            l2_radial: p.l2_grid.0,
            l2_angular: p.l2_grid.1,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
    csv: String,
    svg: String,
    ledger: String,
}

impl Default for RawOutput {
    fn default() -> Self {
        let o = OutputPaths::default();
        Self { dir: o.dir, csv: o.csv, svg: o.svg, ledger: o.ledger }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmissible {
    ell_min: f64,
    ell_max: f64,
    theta_min: f64,
    theta_max: f64,
    radius: f64,
    r_m: f64,
    delta: f64,
    cone_angle: f64,
}

impl ExperimentConfig {
    /// Parse the TOML form; unknown keys are rejected. Does not check the family members,
    /// see [`ExperimentConfig::validate`].
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        let polygon = Polygon::new(raw.polygon.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect())?;
        let mesh = MeshControl { panels_per_half_edge: raw.mesh.panels_per_half_edge, order: raw.mesh.order, grading: raw.mesh.grading };
        mesh.check().map_err(|e| LabError::Config(e.to_string()))?;
        let p = raw.probe;
        let probe = ProbeSettings {
            scan: AnnulusScan { zeta: p.zeta, centers: p.centers, rings: p.rings, angles: p.angles },
            order_tol: p.order_tol,
            n_max: p.n_max,
            boundary_beta: p.boundary_beta,
            l2_grid: (p.l2_radial, p.l2_angular),
        };
        let admissible = raw
            .admissible
            .map(|a| AdmissibleParams::new(a.ell_min, a.ell_max, a.theta_min, a.theta_max, a.radius, a.r_m, a.delta, a.cone_angle))
            .transpose()?;
        let cfg = Self {
            polygon,
            impedance: Complex64::new(raw.impedance[0], raw.impedance[1]),
            k: raw.k,
            direction: Point2::new(raw.direction[0], raw.direction[1]),
            family: raw.family,
            mesh,
            far_field_samples: raw.far_field_samples,
            probe,
            output: OutputPaths { dir: raw.output.dir, csv: raw.output.csv, svg: raw.output.svg, ledger: raw.output.ledger },
            seed: raw.seed,
            admissible,
        };
        cfg.check_settings()?;
        Ok(cfg)
    }

    fn check_settings(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if !(self.k.is_finite() && self.k > 0.0) {
            return bad(format!("k = {} must be positive", self.k));
        }
        if !((self.direction.norm() - 1.0).abs() < 1e-12) {
            return bad("the incident direction must be a unit vector".into());
        }
        if self.far_field_samples < 8 {
            return bad("far_field_samples must be at least 8".into());
        }
        let p = &self.probe;
        if !(p.scan.zeta > 0.0) || p.scan.centers == 0 || p.scan.rings < 2 || p.scan.angles == 0 {
            return bad("probe: need zeta > 0, centers >= 1, rings >= 2, angles >= 1".into());
        }
        if !(p.order_tol > 1e-10 && p.order_tol < 1e-2) || p.n_max == 0 {
            return bad("probe: need order_tol in (1e-10, 1e-2) and n_max >= 1".into());
        }
        if !(p.boundary_beta > 0.0 && p.boundary_beta < 0.5) {
            return bad("probe: boundary_beta must lie in (0, 1/2)".into());
        }
        if p.l2_grid.0 < 2 || p.l2_grid.1 < 4 {
            return bad("probe: l2_radial >= 2 and l2_angular >= 4".into());
        }
        let t = &self.family.magnitudes;
        if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
            return bad("family magnitudes must be a nonempty list of finite numbers".into());
        }
        let all_zero = t.iter().all(|&x| x == 0.0);
        if !all_zero && !(t.iter().all(|&x| x > 0.0) && t.windows(2).all(|w| w[1] < w[0])) {
            return bad("family magnitudes must be positive and strictly decreasing (or all zero)".into());
        }
        if self.family.mode == FamilyMode::VertexShift && self.family.vertex >= self.polygon.len() {
            return bad(format!("vertex {} out of range", self.family.vertex));
        }
        Ok(())
    }

    pub fn incident(&self) -> Result<IncidentWave, LabError> {
        Ok(IncidentWave::new(self.k, self.direction)?)
    }

    pub fn base_impedance(&self) -> ImpedanceParam {
        ImpedanceParam::constant(self.impedance)
    }

    /// Family member with magnitude `t`: obstacle and constant impedance.
    pub fn member(&self, t: f64) -> Result<(Polygon, Complex64), LabError> {
        let c = self.polygon.centroid();
        let poly = match self.family.mode {
            FamilyMode::VertexShift => {
                let v = self.polygon.vertex(self.family.vertex);
                self.polygon.with_vertex_moved(self.family.vertex, (v - c).unit() * t)?
            }
            FamilyMode::UniformScale => self.polygon.scaled_about(c, 1.0 + t)?,
            FamilyMode::Rotate => self.polygon.rotated_about(c, t)?,
            FamilyMode::ImpedanceShift => self.polygon.clone(),
        };
        let eta = match self.family.mode {
            FamilyMode::ImpedanceShift => self.impedance + t,
            _ => self.impedance,
        };
        Ok((poly, eta))
    }

    /// Check every family member (and the base) against the admissible class and the
    /// impedance conditions. Returns one line per member.
    pub fn validate(&self) -> Result<Vec<String>, LabError> {
        let mut lines = Vec::new();
        let members = std::iter::once(0.0).chain(self.family.magnitudes.iter().copied());
        for t in members {
            let (poly, eta) = self.member(t).map_err(|e| LabError::Inadmissible(format!("t = {t}: {e}")))?;
            if self.family.mode == FamilyMode::ImpedanceShift && eta.norm() == 0.0 {
                return Err(LabError::Inadmissible(format!("t = {t}: impedance must be nonzero")));
            }
            let report = ImpedanceParam::constant(eta).validate(&poly);
            if !report.passed() {
                let why: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
                return Err(LabError::Inadmissible(format!("t = {t}: impedance ({})", why.join("; "))));
            }
            if let Some(params) = &self.admissible {
                let report = validate_admissible(&poly, params)?;
                if !report.passed() {
                    let why: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
                    return Err(LabError::Inadmissible(format!("t = {t}: {}", why.join("; "))));
                }
            }
            lines.push(format!("t = {t}: ok ({} vertices, eta = {eta})", poly.len()));
        }
        Ok(lines)
    }
}
