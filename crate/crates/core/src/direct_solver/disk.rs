//! Separable solution for a disk centred at the origin with constant impedance.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{FarFieldPattern, IncidentWave, SolverError};
use crate::geometry::Point2;
use crate::special_functions::{bessel_j_orders, hankel1_orders};

/// `u^s = Σ_n c_n iⁿ H_n(kr) e^{in(θ − φ_p)}` with `c_{−n} = c_n`.
#[derive(Debug, Clone)]
pub struct DiskSeries {
    pub radius: f64,
    pub eta: Complex64,
    pub incident: IncidentWave,
    /// `c_0 ..= c_{n_max}`.
    pub coefficients: Vec<Complex64>,
}

/// Series solution for the disk of radius `radius`; needs `ka ≤ 20` and `n_max ≥ ka + 20`.
pub fn disk_series_oracle(
    radius: f64,
    eta: Complex64,
    inc: IncidentWave,
    n_max: usize,
) -> Result<DiskSeries, SolverError> {
    let k = inc.k();
    let ka = k * radius;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SolverError::Validation(format!("radius {radius} must be positive")));
    }
    if ka > 20.0 {
        return Err(SolverError::Validation(format!("ka = {ka} exceeds 20")));
    }
    if (n_max as f64) < ka + 20.0 {
        return Err(SolverError::Validation(format!("n_max = {n_max} below ka + 20")));
    }
    let j = bessel_j_orders(n_max + 1, ka)?;
    let h = hankel1_orders(n_max + 1, ka)?;
    let coefficients = (0..=n_max)
        .map(|n| {
            let (jd, hd) = derivatives(&j, &h, n);
            let num = jd * k + eta * j[n];
            let den = hd * k + h[n] * eta;
            let scale = k * hd.norm() + eta.norm() * h[n].norm();
            if den.norm() <= 1e-14 * scale || den.norm() == 0.0 {
                return Err(SolverError::Resonance { n });
            }
            Ok(-num / den)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiskSeries { radius, eta, incident: inc, coefficients })
}

fn derivatives(j: &[f64], h: &[Complex64], n: usize) -> (Complex64, Complex64) {
    if n == 0 {
        (Complex64::new(-j[1], 0.0), -h[1])
    } else {
        (Complex64::new(0.5 * (j[n - 1] - j[n + 1]), 0.0), (h[n - 1] - h[n + 1]) * 0.5)
    }
}

/// `iⁿ`.
fn i_pow(n: usize) -> Complex64 {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)][n % 4]
}

impl DiskSeries {
    pub fn n_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.coefficients[n.unsigned_abs() as usize]
    }

    fn relative_angle(&self, theta: f64) -> f64 {
        theta - self.incident.direction().angle()
    }

    /// `(u^s, ∂_r u^s)` at polar position `(r, θ)`, `r ≥ radius`.
    fn scattered_polar(&self, r: f64, theta: f64) -> Result<(Complex64, Complex64), SolverError> {
        let k = self.incident.k();
        let n_max = self.n_max();
        let h = hankel1_orders(n_max + 1, k * r)?;
        let psi = self.relative_angle(theta);
        let mut value = Complex64::new(0.0, 0.0);
        let mut radial = Complex64::new(0.0, 0.0);
        for n in 0..=n_max {
            let hd = if n == 0 { -h[1] } else { (h[n - 1] - h[n + 1]) * 0.5 };
            let weight = if n == 0 { 1.0 } else { 2.0 * (n as f64 * psi).cos() };
            let c = self.coefficients[n] * i_pow(n) * weight;
            value += c * h[n];
            radial += c * hd * k;
        }
        Ok((value, radial))
    }

    /// Scattered field at `x`, `|x| ≥ radius`.
    pub fn scattered(&self, x: Point2) -> Result<Complex64, SolverError> {
        let r = x.norm();
        if !(r >= self.radius * (1.0 - 1e-12)) {
            return Err(SolverError::Domain { x: x.x, y: x.y });
        }
        Ok(self.scattered_polar(r, x.angle())?.0)
    }

    pub fn total(&self, x: Point2) -> Result<Complex64, SolverError> {
        Ok(self.scattered(x)? + self.incident.eval(x))
    }

    /// `√(2/(πk)) e^{−iπ/4} Σ c_n e^{in(θ − φ_p)}` on `m` uniform directions.
    pub fn far_field(&self, m: usize) -> Result<FarFieldPattern, SolverError> {
        if m < 64 {
            return Err(SolverError::Validation(format!("far field needs at least 64 directions, got {m}")));
        }
        let k = self.incident.k();
        let pref = Complex64::from_polar((2.0 / (PI * k)).sqrt(), -PI / 4.0);
        let values = (0..m)
            .map(|l| {
                let psi = self.relative_angle(2.0 * PI * l as f64 / m as f64);
                let s: Complex64 = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(n, c)| if n == 0 { *c } else { c * 2.0 * (n as f64 * psi).cos() })
                    .sum();
                pref * s
            })
            .collect();
        Ok(FarFieldPattern::new(k, self.incident.direction(), values))
    }

    /// `−Im ∫_{r=a} (ū^i ∂_r u^s + ū^s ∂_r u^i) a dθ` by the trapezoid rule on `m` angles.
    pub fn boundary_flux(&self, m: usize) -> Result<f64, SolverError> {
        let a = self.radius;
        let mut acc = 0.0;
        for l in 0..m {
            let theta = 2.0 * PI * l as f64 / m as f64;
            let x = Point2::from_polar(a, theta);
            let (us, dus) = self.scattered_polar(a, theta)?;
            let ui = self.incident.eval(x);
            let g = self.incident.gradient(x);
            let rhat = Point2::from_polar(1.0, theta);
            let dui = g[0] * rhat.x + g[1] * rhat.y;
            acc -= (ui.conj() * dus + us.conj() * dui).im;
        }
        Ok(acc * a * 2.0 * PI / m as f64)
    }
}
