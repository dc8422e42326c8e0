//! Far-field patterns on uniform direction grids.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;

use super::SolverError;
use crate::fmt17;
use crate::geometry::Point2;

/// `u∞` sampled at the angles `2πl/m`, `l = 0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern {
    pub k: f64,
    /// Incident direction.
    pub p: Point2,
    pub values: Vec<Complex64>,
}

impl FarFieldPattern {
    pub fn new(k: f64, p: Point2, values: Vec<Complex64>) -> Self {
        Self { k, p, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn angle(&self, l: usize) -> f64 {
        2.0 * PI * l as f64 / self.len() as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len()).map(|l| self.angle(l)).collect()
    }

    /// Fourier coefficients `c_j`, `j ∈ (−m/2, m/2]`, indexed by `j mod m`,
    /// with an even-length Nyquist mode split evenly between `±m/2`.
    fn coefficients(&self) -> Vec<Complex64> {
        let m = self.len();
        let roots = roots_of_unity(m);
        (0..m)
            .map(|j| {
                let s: Complex64 = self
                    .values
                    .iter()
                    .enumerate()
                    .map(|(l, v)| v * roots[(m - (j * l) % m) % m])
                    .sum();
                s / m as f64
            })
            .collect()
    }

    /// Trigonometric interpolant on `factor·m` uniform directions.
    pub fn upsampled(&self, factor: usize) -> Self {
        let m = self.len();
        let fine = m * factor.max(1);
        let coeffs = self.coefficients();
        let roots = roots_of_unity(fine);
        let half = m / 2;
        let values = (0..fine)
            .map(|q| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, c) in coeffs.iter().enumerate() {
                    if m % 2 == 0 && j == half {
                        // Nyquist: ½ c (e^{i m/2 θ} + e^{-i m/2 θ})
                        let pos = roots[(half * q) % fine];
                        let neg = roots[(fine - (half * q) % fine) % fine];
                        acc += c * 0.5 * (pos + neg);
                        continue;
                    }
                    let freq = if j > half { fine - (m - j) } else { j };
                    acc += c * roots[(freq * q) % fine];
                }
                acc
            })
            .collect();
        Self { k: self.k, p: self.p, values }
    }

    /// Sup norm over the ×4 trigonometric upsampling.
    pub fn sup_norm(&self) -> f64 {
        self.upsampled(4).values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `∫ |u∞|² dθ` by the trapezoid rule (exact for the interpolant).
    pub fn l2_norm_squared(&self) -> f64 {
        2.0 * PI / self.len() as f64 * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// CSV with header `angle_rad,re,im` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_rad,re,im\n");
        for (l, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt17(self.angle(l)), fmt17(v.re), fmt17(v.im));
        }
        out
    }

    /// Parse CSV written by [`Self::to_csv`]; angles must form the uniform grid.
    pub fn from_csv(text: &str, k: f64, p: Point2) -> Result<Self, SolverError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "angle_rad,re,im" => {}
            other => return Err(SolverError::Format(format!("bad header {other:?}"))),
        }
        let mut angles = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(SolverError::Format(format!("row {i}: expected 3 columns")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| SolverError::Format(format!("row {i}: {e}")));
            angles.push(num(cols[0])?);
            values.push(Complex64::new(num(cols[1])?, num(cols[2])?));
        }
        let m = angles.len();
        if m == 0 {
            return Err(SolverError::Format("no rows".into()));
        }
        for (l, a) in angles.iter().enumerate() {
            let expected = 2.0 * PI * l as f64 / m as f64;
            if (a - expected).abs() > 1e-12 {
                return Err(SolverError::Format(format!("angle {a} at row {l} is off the uniform grid")));
            }
        }
        Ok(Self { k, p, values })
    }
}

fn roots_of_unity(n: usize) -> Vec<Complex64> {
    (0..n).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).collect()
}

/// Sup-norm distance of two patterns on the same grid, after ×4 trigonometric upsampling.
pub fn far_field_error(a: &FarFieldPattern, b: &FarFieldPattern) -> Result<f64, SolverError> {
    if a.len() != b.len() {
        return Err(SolverError::GridMismatch(a.len(), b.len()));
    }
    let diff = FarFieldPattern::new(
        a.k,
        a.p,
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
    );
    Ok(diff.sup_norm())
}
