//! Cylinder functions of integer order, the Gamma function and truncated
//! Laplace moments.
//!
//! `J_n` comes from the power series for small arguments and from Miller's
//! backward recurrence otherwise. `Y_0`, `Y_1` use Neumann series in the
//! recurrence values (or Hankel's asymptotic expansion for large arguments),
//! and higher orders follow by forward recurrence, which is stable for `Y`.

use crate::quadrature::adaptive_gauss;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};
use thiserror::Error;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Below this argument the power series is used for `J_n`.
const SERIES_LIMIT: f64 = 0.25;
/// Above this argument `J_0, J_1, Y_0, Y_1` come from the asymptotic expansion.
const ASYMPTOTIC_LIMIT: f64 = 25.0;
const MAX_ARGUMENT: f64 = 1.0e5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialFnError {
    #[error("cylinder function of order {order} is singular at t = 0")]
    Singular { order: usize },
    #[error("argument t = {arg} outside the supported range for order {order}")]
    Range { order: usize, arg: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// Value and derivative of a cylinder function at one order and argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderEval {
    pub order: usize,
    pub arg: f64,
    pub value: Complex64,
    pub derivative: Complex64,
}

fn check_arg(order: usize, t: f64) -> Result<(), SpecialFnError> {
    if !t.is_finite() || !(0.0..=MAX_ARGUMENT).contains(&t) {
        return Err(SpecialFnError::Range { order, arg: t });
    }
    Ok(())
}

/// `J_n(t)` for `n ≥ 0`, `t ≥ 0`.
pub fn bessel_j(n: usize, t: f64) -> Result<f64, SpecialFnError> {
    check_arg(n, t)?;
    Ok(bessel_j_orders(n, t)?[n])
}

/// `J_0(t) … J_{n_max}(t)`.
pub fn bessel_j_orders(n_max: usize, t: f64) -> Result<Vec<f64>, SpecialFnError> {
    check_arg(n_max, t)?;
    if t == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    if t <= SERIES_LIMIT {
        return Ok((0..=n_max).map(|n| j_series(n, t)).collect());
    }
    Ok(j_miller(n_max, t))
}

/// Power series `Σ_p (-1)^p (t/2)^{n+2p} / (p! (n+p)!)`.
fn j_series(n: usize, t: f64) -> f64 {
    let half = 0.5 * t;
    let mut lead = 1.0;
    for j in 1..=n {
        lead *= half / j as f64;
        if lead == 0.0 {
            return 0.0;
        }
    }
    let q = -half * half;
    let mut term = lead;
    let mut sum = lead;
    for p in 1..200 {
        term *= q / (p as f64 * (n + p) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller_start(n_max: usize, t: f64) -> usize {
    let m0 = (n_max as f64).max(t);
    let m = (m0 + 30.0 + (50.0 * m0).sqrt()).ceil() as usize;
    m + (m % 2)
}

/// Backward recurrence normalised by `J_0 + 2 Σ J_{2k} = 1`.
fn j_miller(n_max: usize, t: f64) -> Vec<f64> {
    let m = miller_start(n_max, t);
    let mut out = vec![0.0; n_max + 1];
    let mut next = 0.0f64; // j_{k+1}
    let mut cur = 1e-300f64; // j_k
    let mut norm = 0.0f64;
    let inv_t = 2.0 / t;
    for k in (1..=m).rev() {
        if k <= n_max {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = k as f64 * inv_t * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            if k <= n_max {
                out[k..].iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    out[0] = cur;
    norm += cur;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Hankel asymptotic expansion: `(J_ν, Y_ν)` for `ν ∈ {0, 1}` and large `t`.
fn asymptotic_jy(nu: usize, t: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0; // a_k / t^k
    let mut last = f64::INFINITY;
    for k in 0..200usize {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * t);
        }
        let mag = term.abs();
        if mag > last {
            break;
        }
        last = mag;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if mag < 1e-17 * p.abs().max(1e-300) {
            break;
        }
    }
    let chi = t - (nu as f64) * 0.5 * PI - FRAC_PI_4;
    let amp = (2.0 / (PI * t)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `Y_0` and `Y_1` from Neumann series over the supplied `J_k` values.
fn y01_neumann(j: &[f64], t: f64) -> (f64, f64) {
    let log_term = (0.5 * t).ln();
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1usize;
    while 2 * k + 1 < j.len() {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (2 * k + 1) as f64 * j[2 * k + 1] / (k * (k + 1)) as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * (log_term + EULER_GAMMA) * j[0] - 4.0 / PI * s0;
    let y1 = -2.0 / (PI * t) * j[0] + 2.0 / PI * (log_term - (1.0 - EULER_GAMMA)) * j[1]
        - 2.0 / PI * s1;
    (y0, y1)
}

/// `(J_n, Y_n)` for `n = 0 … n_max`, requiring `t > 0`.
pub fn bessel_jy_orders(n_max: usize, t: f64) -> Result<(Vec<f64>, Vec<f64>), SpecialFnError> {
    if t == 0.0 {
        return Err(SpecialFnError::Singular { order: n_max });
    }
    check_arg(n_max, t)?;
    let (mut j, y01) = if t >= ASYMPTOTIC_LIMIT {
        let j = bessel_j_orders(n_max.max(1), t)?;
        let (_, y0) = asymptotic_jy(0, t);
        let (_, y1) = asymptotic_jy(1, t);
        (j, (y0, y1))
    } else {
        let need = miller_start(1, t).max(n_max + 2);
        let j = bessel_j_orders(need, t)?;
        let y = y01_neumann(&j, t);
        (j, y)
    };
    j.truncate(n_max + 1);
    let mut y = Vec::with_capacity(n_max + 1);
    y.push(y01.0);
    if n_max >= 1 {
        y.push(y01.1);
    }
    for n in 1..n_max {
        let next = 2.0 * n as f64 / t * y[n] - y[n - 1];
        if !next.is_finite() {
            return Err(SpecialFnError::Range { order: n + 1, arg: t });
        }
        y.push(next);
    }
    Ok((j, y))
}

/// `Y_n(t)`, `t > 0`.
pub fn bessel_y(n: usize, t: f64) -> Result<f64, SpecialFnError> {
    Ok(bessel_jy_orders(n, t)?.1[n])
}

/// `H_n^{(1)}(t) = J_n(t) + i Y_n(t)`, `t > 0`.
pub fn hankel1(n: usize, t: f64) -> Result<Complex64, SpecialFnError> {
    let (j, y) = bessel_jy_orders(n, t)?;
    Ok(Complex64::new(j[n], y[n]))
}

/// `H_0^{(1)} … H_{n_max}^{(1)}` at `t > 0`.
pub fn hankel1_orders(n_max: usize, t: f64) -> Result<Vec<Complex64>, SpecialFnError> {
    let (j, y) = bessel_jy_orders(n_max, t)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

/// Derivatives from `f_n' = (f_{n-1} - f_{n+1})/2`, `f_0' = -f_1`, given orders `0 … n+1`.
fn derivative_from<T>(values: &[T], n: usize) -> T
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    if n == 0 {
        -values[1]
    } else {
        (values[n - 1] - values[n + 1]) * 0.5
    }
}

/// `J_n` with its derivative.
pub fn cylinder_j(n: usize, t: f64) -> Result<CylinderEval, SpecialFnError> {
    let j = bessel_j_orders(n + 1, t)?;
    Ok(CylinderEval {
        order: n,
        arg: t,
        value: Complex64::new(j[n], 0.0),
        derivative: Complex64::new(derivative_from(&j, n), 0.0),
    })
}

/// `H_n^{(1)}` with its derivative.
pub fn cylinder_h(n: usize, t: f64) -> Result<CylinderEval, SpecialFnError> {
    let h = hankel1_orders(n + 1, t)?;
    Ok(CylinderEval {
        order: n,
        arg: t,
        value: h[n],
        derivative: derivative_from(&h, n),
    })
}

/// `J_n'(t)`.
pub fn bessel_j_deriv(n: usize, t: f64) -> Result<f64, SpecialFnError> {
    Ok(cylinder_j(n, t)?.derivative.re)
}

/// `H_n^{(1)'}(t)`.
pub fn hankel1_deriv(n: usize, t: f64) -> Result<Complex64, SpecialFnError> {
    Ok(cylinder_h(n, t)?.derivative)
}

/// `(H_0^{(1)}(t), H_1^{(1)}(t))`, the pair needed by the layer kernels.
pub fn hankel01(t: f64) -> Result<(Complex64, Complex64), SpecialFnError> {
    if t == 0.0 {
        return Err(SpecialFnError::Singular { order: 0 });
    }
    check_arg(1, t)?;
    if t >= ASYMPTOTIC_LIMIT {
        let (j0, y0) = asymptotic_jy(0, t);
        let (j1, y1) = asymptotic_jy(1, t);
        return Ok((Complex64::new(j0, y0), Complex64::new(j1, y1)));
    }
    let (j, y) = bessel_jy_orders(1, t)?;
    Ok((Complex64::new(j[0], y[0]), Complex64::new(j[1], y[1])))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `Γ(x)` for real `x` (reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x == x.floor() && x > 0.0 && x <= 171.0 {
        return (1..x as u64).map(|k| k as f64).product();
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Result of [`truncated_laplace_moment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceMoment {
    /// `∫_0^h r^{b-1} e^{-μ r} dr`.
    pub value: Complex64,
    /// `Γ(b)/μ^b`, the integral over the whole half line.
    pub full: Complex64,
    /// `∫_h^∞ r^{b-1} e^{-μ r} dr`.
    pub tail: Complex64,
    /// `|Γ(b)/μ^b| + 2 e^{-Re μ h/2} / Re μ`.
    pub bound: f64,
    /// `2 e^{-Re μ h/2} / Re μ`, the tail bound alone.
    pub tail_bound: f64,
}

/// `∫_0^h r^{b-1} e^{-μ r} dr` evaluated as `Γ(b)/μ^b` minus the tail.
///
/// Requires `b > 0`, `h > 0` and `Re μ ≥ max(0, 2(b-1)/h)` with `Re μ > 0`.
pub fn truncated_laplace_moment(b: f64, mu: Complex64, h: f64) -> Result<LaplaceMoment, SpecialFnError> {
    if !(b > 0.0) || !(h > 0.0) || !mu.re.is_finite() || !mu.im.is_finite() {
        return Err(SpecialFnError::Domain(format!("need b > 0 and h > 0, got b = {b}, h = {h}")));
    }
    let threshold = 2.0 * (b - 1.0) / h;
    if !(mu.re > 0.0) || mu.re < threshold {
        return Err(SpecialFnError::Domain(format!(
            "Re mu = {} below the threshold {}",
            mu.re,
            threshold.max(0.0)
        )));
    }
    let full = gamma(b) * mu.powc(Complex64::new(-b, 0.0));
    let tail = laplace_tail(b, mu, h, full.norm());
    let tail_bound = 2.0 * (-mu.re * h / 2.0).exp() / mu.re;
    Ok(LaplaceMoment {
        value: full - tail,
        full,
        tail,
        bound: full.norm() + tail_bound,
        tail_bound,
    })
}

/// `∫_h^∞ r^{b-1} e^{-μ r} dr` by adaptive quadrature on windows of a few decay lengths.
fn laplace_tail(b: f64, mu: Complex64, h: f64, scale: f64) -> Complex64 {
    let tol = 1e-13f64.min(1e-15 * scale).max(1e-300);
    let rel = 1e-15;
    let decay = 1.0 / mu.re;
    let osc = if mu.im != 0.0 { 2.0 * PI / mu.im.abs() } else { f64::INFINITY };
    let window = decay.min(osc).max(1e-300) * 4.0;
    let e0 = (-mu * h).exp();
    let mut integrand = |s: f64| {
        let r = h + s;
        e0 * (-mu * s).exp() * r.powf(b - 1.0)
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut a = 0.0;
    for _ in 0..100_000 {
        let b_end = a + window;
        let (piece, _) = adaptive_gauss(&mut integrand, a, b_end, tol, rel, 14);
        total += piece;
        a = b_end;
        // remaining tail bound: r^{b-1} e^{-Re μ r} with r growing
        let r = h + a;
        let envelope = r.powf(b - 1.0) * (-mu.re * r).exp() * decay * 4.0;
        if envelope < tol * 1e-3 || envelope == 0.0 {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn hankel_singular_at_zero() {
        assert!(matches!(hankel1(0, 0.0), Err(SpecialFnError::Singular { .. })));
    }

    #[test]
    fn gamma_matches_factorials_and_half() {
        assert_eq!(gamma(5.0), 24.0);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(2.5) - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert!((ln_gamma(10.5) - gamma(10.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn wronskian_at_two_five() {
        let j = cylinder_j(2, 5.0).unwrap();
        let y2 = bessel_jy_orders(3, 5.0).unwrap().1;
        let y_deriv = 0.5 * (y2[1] - y2[3]);
        let w = j.value.re * y_deriv - j.derivative.re * y2[2];
        assert!((w - 2.0 / (5.0 * PI)).abs() < 1e-10 * 2.0 / (5.0 * PI));
    }

    #[test]
    fn asymptotic_and_recurrence_agree_at_switch() {
        let t = ASYMPTOTIC_LIMIT;
        let (ja, ya) = asymptotic_jy(0, t);
        let j = j_miller(2, t);
        let jfull = bessel_j_orders(miller_start(1, t), t).unwrap();
        let (y0, _) = y01_neumann(&jfull, t);
        assert!((ja - j[0]).abs() < 1e-14);
        assert!((ya - y0).abs() < 1e-13);
    }

    #[test]
    fn elementary_laplace_moment() {
        let m = truncated_laplace_moment(1.0, Complex64::new(1.0, 0.0), 1.0).unwrap();
        assert!((m.value.re - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert!(m.value.im.abs() < 1e-15);
        assert!(m.value.norm() <= m.bound);
    }

    #[test]
    fn laplace_moment_domain_error() {
        // b = 3, h = 1 needs Re mu >= 4
        let r = truncated_laplace_moment(3.0, Complex64::new(3.0, 0.0), 1.0);
        assert!(matches!(r, Err(SpecialFnError::Domain(_))));
    }
}
