//! Fourier–Bessel expansions `Σ (aₙe^{inθ} + bₙe^{−inθ}) Jₙ(kr)` fitted on a circle.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::CornerError;
use crate::direct_solver::ScatterSolution;
use crate::geometry::Point2;
use crate::special_functions::{bessel_j_orders, factorial};

/// Default number of angular orders kept.
pub const DEFAULT_N_MAX: usize = 32;
/// Orders with `|Jₙ(kh)|` below this are dropped.
const J_UNDERFLOW: f64 = 1e-280;
/// Circle coefficients below this fraction of the largest are rounding noise and set to zero.
const NOISE_FLOOR: f64 = 1e-14;

/// Fourier–Bessel expansion about `center`, with angles measured from the direction `axis`.
///
/// The order-zero coefficient is stored once, in `a[0]`; `b[0]` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBesselExpansion {
    pub center: Point2,
    /// Unit vector of the angular origin.
    pub axis: Point2,
    pub radius: f64,
    pub k: f64,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// Order cap asked for; `n_max()` can be smaller when `Jₙ(kh)` underflows.
    pub requested_n_max: usize,
    /// Largest misfit of the reconstruction at the sampling points.
    pub residual: f64,
    /// Largest sample modulus.
    pub sample_scale: f64,
}

/// Field value and gradient; the gradient is in the expansion's local axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSample {
    pub value: Complex64,
    pub gradient: [Complex64; 2],
}

impl FourierBesselExpansion {
    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }

    /// Global point to local coordinates.
    pub fn to_local(&self, x: Point2) -> Point2 {
        let d = x - self.center;
        Point2::new(d.dot(self.axis), self.axis.cross(d))
    }

    /// Coefficients of the integer-order modes `J_m(kr)e^{imθ}`, `m = −n_max..=n_max`,
    /// indexed by `m + n_max`; `J_{−n} = (−1)ⁿ Jₙ`.
    fn signed_coefficients(&self) -> Vec<Complex64> {
        let n_max = self.n_max();
        let mut d = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
        d[n_max] = self.a[0];
        for n in 1..=n_max {
            d[n_max + n] = self.a[n];
            d[n_max - n] = if n % 2 == 0 { self.b[n] } else { -self.b[n] };
        }
        d
    }

    /// Value and local gradient at the local point `q`.
    ///
    /// Uses `(∂₁ ± i∂₂) J_m e^{imθ} = ∓k J_{m±1} e^{i(m±1)θ}`, which stays regular at the centre.
    pub fn sample_local(&self, q: Point2) -> Result<LocalSample, CornerError> {
        let n_max = self.n_max();
        let r = q.norm();
        let j = bessel_j_orders(n_max + 1, self.k * r)?;
        let phase = if r > 0.0 { Complex64::new(q.x / r, q.y / r) } else { Complex64::new(1.0, 0.0) };
        // mode(m) = J_m(kr) e^{imθ} for |m| ≤ n_max + 1
        let mode = |m: i64| -> Complex64 {
            let n = m.unsigned_abs() as usize;
            let jm = if m < 0 && n % 2 == 1 { -j[n] } else { j[n] };
            phase.powi(m as i32) * jm
        };
        let d = self.signed_coefficients();
        let mut value = Complex64::new(0.0, 0.0);
        let mut raise = Complex64::new(0.0, 0.0); // (∂₁ + i∂₂) u
        let mut lower = Complex64::new(0.0, 0.0); // (∂₁ − i∂₂) u
        for (idx, c) in d.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m = idx as i64 - n_max as i64;
            value += c * mode(m);
            raise -= c * mode(m + 1) * self.k;
            lower += c * mode(m - 1) * self.k;
        }
        let gx = (raise + lower) * 0.5;
        let gy = (raise - lower) * Complex64::new(0.0, -0.5);
        Ok(LocalSample { value, gradient: [gx, gy] })
    }

    pub fn eval_local(&self, q: Point2) -> Result<Complex64, CornerError> {
        Ok(self.sample_local(q)?.value)
    }

    pub fn eval(&self, x: Point2) -> Result<Complex64, CornerError> {
        self.eval_local(self.to_local(x))
    }

    /// Circle-contribution sizes `max(|aₙ|, |bₙ|)·|Jₙ(kh)|`.
    pub fn circle_weights(&self) -> Result<Vec<f64>, CornerError> {
        let j = bessel_j_orders(self.n_max(), self.k * self.radius)?;
        Ok((0..=self.n_max()).map(|n| self.a[n].norm().max(self.b[n].norm()) * j[n].abs()).collect())
    }
}

/// Fit the expansion to samples `u(center + h(cos θⱼ, sin θⱼ))` (angles from `axis`),
/// `θⱼ = 2πj/m`, by a discrete Fourier transform divided by `Jₙ(kh)`.
pub fn expand_on_circle(
    samples: &[Complex64],
    center: Point2,
    axis: Point2,
    k: f64,
    h: f64,
    n_max: usize,
) -> Result<FourierBesselExpansion, CornerError> {
    let m = samples.len();
    if n_max == 0 || m < 4 * n_max {
        return Err(CornerError::Precondition(format!("need at least 4·n_max = {} samples, got {m}", 4 * n_max)));
    }
    if !(k > 0.0 && h > 0.0 && k * h < 1.0) {
        return Err(CornerError::Precondition(format!("need k > 0, h > 0 and kh < 1, got k = {k}, h = {h}")));
    }
    if !((axis.norm() - 1.0).abs() < 1e-12) {
        return Err(CornerError::Precondition("axis must be a unit vector".into()));
    }
    let j = bessel_j_orders(n_max, k * h)?;
    let effective = (0..=n_max).take_while(|&n| j[n].abs() >= J_UNDERFLOW).last().unwrap_or(0);
    let dft = |freq: i64| -> Complex64 {
        samples
            .iter()
            .enumerate()
            .map(|(l, u)| u * Complex64::from_polar(1.0, -2.0 * PI * (freq * l as i64) as f64 / m as f64))
            .sum::<Complex64>()
            / m as f64
    };
    let mut plus: Vec<Complex64> = (0..=effective as i64).map(dft).collect();
    let mut minus: Vec<Complex64> = (0..=effective as i64).map(|n| dft(-n)).collect();
    let peak = plus.iter().chain(&minus).map(|c| c.norm()).fold(0.0, f64::max);
    for c in plus.iter_mut().chain(minus.iter_mut()) {
        if c.norm() <= NOISE_FLOOR * peak {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let mut a = vec![Complex64::new(0.0, 0.0); effective + 1];
    let mut b = vec![Complex64::new(0.0, 0.0); effective + 1];
    a[0] = plus[0] / j[0];
    for n in 1..=effective {
        a[n] = plus[n] / j[n];
        b[n] = minus[n] / j[n];
    }
    let mut exp = FourierBesselExpansion {
        center,
        axis,
        radius: h,
        k,
        a,
        b,
        requested_n_max: n_max,
        residual: 0.0,
        sample_scale: samples.iter().map(|s| s.norm()).fold(0.0, f64::max),
    };
    let mut residual: f64 = 0.0;
    for (l, u) in samples.iter().enumerate() {
        let q = Point2::from_polar(h, 2.0 * PI * l as f64 / m as f64);
        residual = residual.max((exp.eval_local(q)? - u).norm());
    }
    exp.residual = residual;
    Ok(exp)
}

/// Sample `field` at `m` uniform angles on the circle and fit.
pub fn expand_field(
    field: impl Fn(Point2) -> Complex64,
    center: Point2,
    axis: Point2,
    k: f64,
    h: f64,
    n_max: usize,
    m: usize,
) -> Result<FourierBesselExpansion, CornerError> {
    let perp = axis.perp();
    let samples: Vec<Complex64> = (0..m)
        .map(|l| {
            let t = 2.0 * PI * l as f64 / m as f64;
            field(center + axis * (h * t.cos()) + perp * (h * t.sin()))
        })
        .collect();
    expand_on_circle(&samples, center, axis, k, h, n_max)
}

/// Expand the total field of a solver solution on the circle of radius `h` about `center`,
/// which must stay clear of the obstacle.
pub fn expand_solution(
    sol: &ScatterSolution,
    center: Point2,
    axis: Point2,
    h: f64,
    n_max: usize,
) -> Result<FourierBesselExpansion, CornerError> {
    let gap = sol.polygon().distance(center);
    if !(gap > h) {
        return Err(CornerError::Configuration(format!("the disk of radius {h} meets the obstacle (distance {gap})")));
    }
    let m = 4 * n_max;
    let perp = axis.perp();
    let pts: Vec<Point2> = (0..m)
        .map(|l| {
            let t = 2.0 * PI * l as f64 / m as f64;
            center + axis * (h * t.cos()) + perp * (h * t.sin())
        })
        .collect();
    let samples = sol.evaluate_total(&pts)?;
    expand_on_circle(&samples, center, axis, sol.incident.k(), h, n_max)
}

/// Outcome of the vanishing-order estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingOrder {
    pub order: usize,
    pub a_n: Complex64,
    pub b_n: Complex64,
    /// `(|a_N| + |b_N|) k^N/(2^N N!)`.
    pub leading_constant: f64,
    /// `ℛ` with `|δu′_{N+1}| ≤ ℛ r^{N+1}` on the disk.
    pub remainder_constant: f64,
}

/// Smallest order whose coefficient exceeds `rel_tol` times the largest coefficient.
pub fn vanishing_order(exp: &FourierBesselExpansion, rel_tol: f64) -> Result<VanishingOrder, CornerError> {
    if !(rel_tol > 1e-10 && rel_tol < 1e-2) {
        return Err(CornerError::Precondition(format!("rel_tol = {rel_tol} outside (1e-10, 1e-2)")));
    }
    let size = |n: usize| exp.a[n].norm().max(exp.b[n].norm());
    let scale = (0..=exp.n_max()).map(size).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(CornerError::InfiniteOrder);
    }
    let order = (0..=exp.n_max()).find(|&n| size(n) > rel_tol * scale).ok_or(CornerError::InfiniteOrder)?;
    let d = decompose(exp, order);
    Ok(VanishingOrder {
        order,
        a_n: exp.a[order],
        b_n: exp.b[order],
        leading_constant: d.leading_constant,
        remainder_constant: d.remainder_constant,
    })
}

/// The split `u′ = u′_N + δu′_{N+1}` with `u′_N = (a_N e^{iNθ} + b_N e^{−iNθ}) k^N r^N/(2^N N!)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub order: usize,
    pub a_n: Complex64,
    pub b_n: Complex64,
    pub leading_constant: f64,
    pub remainder_constant: f64,
    pub expansion: FourierBesselExpansion,
}

/// `Σ_{p ≥ p0} (t)^{n+2p}/(p!(n+p)!)`.
fn abs_bessel_series(n: usize, t: f64, p0: usize) -> f64 {
    let mut term = t.powi(n as i32) / factorial(n);
    let mut sum = 0.0;
    for p in 0..200 {
        if p >= p0 {
            sum += term;
        }
        term *= t * t / ((p + 1) as f64 * (n + p + 1) as f64);
        if p >= p0 && term < 1e-18 * sum {
            break;
        }
    }
    sum
}

pub fn decompose(exp: &FourierBesselExpansion, order: usize) -> Decomposition {
    let k = exp.k;
    let h = exp.radius;
    let n = order.min(exp.n_max());
    let (a_n, b_n) = (exp.a[n], exp.b[n]);
    let scale = (0.5 * k).powi(n as i32) / factorial(n);
    let leading_constant = (a_n.norm() + b_n.norm()) * scale;
    // remainder of the N-th mode: C_N Σ_{p≥1} N!/(p!(N+p)!) (kh/2)^{2p} / h
    let t = 0.5 * k * h;
    let own = if t > 0.0 {
        leading_constant * factorial(n) * abs_bessel_series(n, t, 1) / t.powi(n as i32) / h
    } else {
        0.0
    };
    // higher modes: Σ_{n'>N} (|a|+|b|) Σ_p (kh/2)^{n'+2p}/(p!(n'+p)!) / h^{N+1}
    let higher: f64 = (n + 1..=exp.n_max())
        .map(|m| (exp.a[m].norm() + exp.b[m].norm()) * abs_bessel_series(m, t, 0))
        .sum::<f64>()
        / h.powi(n as i32 + 1);
    Decomposition { order: n, a_n, b_n, leading_constant, remainder_constant: own + higher, expansion: exp.clone() }
}

impl Decomposition {
    fn mode_factor(&self, theta: f64) -> Complex64 {
        let nf = self.order as f64;
        self.a_n * Complex64::from_polar(1.0, nf * theta) + self.b_n * Complex64::from_polar(1.0, -nf * theta)
    }

    fn scale(&self) -> f64 {
        (0.5 * self.expansion.k).powi(self.order as i32) / factorial(self.order)
    }

    /// `u′_N` at a local point.
    pub fn leading_local(&self, q: Point2) -> Complex64 {
        let r = q.norm();
        let theta = if r > 0.0 { q.angle() } else { 0.0 };
        self.mode_factor(theta) * (self.scale() * r.powi(self.order as i32))
    }

    /// Local gradient of `u′_N`; `r^N e^{±iNθ} = (x₁ ± i x₂)^N`.
    pub fn leading_gradient_local(&self, q: Point2) -> [Complex64; 2] {
        let n = self.order as i32;
        if n == 0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let z = Complex64::new(q.x, q.y);
        let zb = z.conj();
        let s = self.scale() * n as f64;
        let da = z.powi(n - 1) * self.a_n * s;
        let db = zb.powi(n - 1) * self.b_n * s;
        // ∂₁ z^N = N z^{N−1}, ∂₂ z^N = iN z^{N−1}; ∂₂ z̄^N = −iN z̄^{N−1}
        [da + db, (da - db) * Complex64::new(0.0, 1.0)]
    }

    /// `δu′_{N+1} = u′ − u′_N` at a local point.
    pub fn remainder_local(&self, q: Point2) -> Result<Complex64, CornerError> {
        Ok(self.expansion.eval_local(q)? - self.leading_local(q))
    }
}

/// `(1/ρ^m) ∫_{B_ρ} |u| dx` by polar Gauss–Legendre × trapezoid quadrature.
pub fn ball_moment(exp: &FourierBesselExpansion, rho: f64, m: i32) -> Result<f64, CornerError> {
    use crate::quadrature::GaussLegendre;
    let radial = GaussLegendre::new(24);
    let angles = 256;
    let mut err = None;
    let integral = radial.integrate(0.0, rho, |r| {
        let ring: f64 = (0..angles)
            .map(|l| {
                let q = Point2::from_polar(r, 2.0 * PI * l as f64 / angles as f64);
                match exp.eval_local(q) {
                    Ok(v) => v.norm(),
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                }
            })
            .sum::<f64>()
            * 2.0
            * PI
            / angles as f64;
        Complex64::new(ring * r, 0.0)
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(integral.re / rho.powi(m))
}

/// Ball moments of orders `0..=max_m` at a decreasing sequence of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub radii: Vec<f64>,
    /// `values[m][j] = (1/ρ_j^m) ∫_{B_{ρ_j}} |u|`.
    pub values: Vec<Vec<f64>>,
    /// Whether the sequence for order `m` tends to zero (each step shrinks it by at least a quarter).
    pub vanishes: Vec<bool>,
}

impl MomentCheck {
    /// Largest `N` with vanishing moments for all `m ≤ N + 1`.
    pub fn inferred_order(&self) -> Option<usize> {
        let first_non = self.vanishes.iter().position(|v| !v)?;
        first_non.checked_sub(2)
    }
}

pub fn moment_check(exp: &FourierBesselExpansion, radii: &[f64], max_m: usize) -> Result<MomentCheck, CornerError> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > 0.0 && w[1] <= 0.5 * w[0])) || radii[0] > exp.radius {
        return Err(CornerError::Precondition("each radius must be at most half the previous one, inside the disk".into()));
    }
    let base: Vec<f64> = radii.iter().map(|&r| ball_moment(exp, r, 0)).collect::<Result<_, _>>()?;
    let values: Vec<Vec<f64>> =
        (0..=max_m).map(|m| base.iter().zip(radii).map(|(v, r)| v / r.powi(m as i32)).collect()).collect();
    let vanishes = values
        .iter()
        .map(|seq| seq.windows(2).all(|w| w[1] <= 0.75 * w[0]))
        .collect();
    Ok(MomentCheck { radii: radii.to_vec(), values, vanishes })
}
