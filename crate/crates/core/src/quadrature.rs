//! Quadrature rules shared by the solver, the corner ledger and the moment routines.
//!
//! Gauss–Legendre nodes are generated by Newton iteration on the Legendre
//! recurrence, tanh–sinh rules handle endpoint singularities, and
//! [`adaptive_gauss`] bisects until two Gauss estimates agree.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| f(mid + half * t) * w)
            .sum::<Complex64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tanh–sinh rule on `[-1, 1]`, stored as distances from the nearer endpoint so
/// that integrands singular at an endpoint can be evaluated without cancellation.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    /// `(x, 1 - |x|, w)` triples.
    pub points: Vec<(f64, f64, f64)>,
}

impl TanhSinh {
    /// Step `1/2^level`, truncated where weights fall below `1e-300`.
    pub fn new(level: u32) -> Self {
        Self::with_cutoff(level, 1e-300)
    }

    /// Step `1/2^level`, truncated where weights fall below `cutoff`.
    pub fn with_cutoff(level: u32, cutoff: f64) -> Self {
        let h = 1.0 / f64::from(1u32 << level);
        let mut points = Vec::new();
        let half_pi = 0.5 * PI;
        let mut j = 0i64;
        loop {
            let t = j as f64 * h;
            let s = half_pi * t.sinh();
            let c = half_pi * t.cosh();
            let ch = s.cosh();
            // 1 - tanh(s) = 2 / (e^{2s} + 1)
            let comp = 2.0 / ((2.0 * s).exp() + 1.0);
            let x = s.tanh();
            let w = h * c / (ch * ch);
            if w < cutoff || comp == 0.0 {
                break;
            }
            if j == 0 {
                points.push((0.0, 1.0, w));
            } else {
                points.push((x, comp, w));
                points.push((-x, comp, w));
            }
            j += 1;
        }
        Self { points }
    }

    /// Nodes on `[a, b]` as `(x, distance to a, distance to b, weight)`.
    pub fn nodes(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        self.points.iter().map(move |&(x, comp, w)| {
            // distance from the nearer endpoint, kept accurate near it
            let (da, db) = if x < 0.0 {
                (half * comp, half * (2.0 - comp))
            } else {
                (half * (2.0 - comp), half * comp)
            };
            let point = if x < 0.0 { a + da } else { b - db };
            (point, da, db, w * half)
        })
    }

    /// Integrate over `[a, b]`; `f` receives `(x, distance to a, distance to b)`.
    pub fn integrate<F: FnMut(f64, f64, f64) -> Complex64>(
        &self,
        a: f64,
        b: f64,
        mut f: F,
    ) -> Complex64 {
        self.nodes(a, b).map(|(x, da, db, w)| f(x, da, db) * w).sum()
    }
}

/// Adaptive bisection with a pair of Gauss estimates per interval.
///
/// An interval is accepted once the two estimates differ by less than
/// `max(abs_tol, rel_tol·|estimate|)` (the absolute part halves with each
/// bisection). Returns the integral and the accumulated error estimate; when
/// `max_depth` is hit the estimate reports what was not resolved.
pub fn adaptive_gauss<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> (Complex64, f64) {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(20);
    }
    RULE.with(|rule| {
        let whole = rule.integrate(a, b, &mut *f);
        refine(rule, f, (a, b), whole, (abs_tol, rel_tol), max_depth)
    })
}

fn refine<F: FnMut(f64) -> Complex64>(
    rule: &GaussLegendre,
    f: &mut F,
    (a, b): (f64, f64),
    whole: Complex64,
    (tol, rel): (f64, f64),
    depth: u32,
) -> (Complex64, f64) {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let sum = left + right;
    let err = (sum - whole).norm();
    if err <= tol.max(rel * sum.norm()) || depth == 0 {
        return (sum, err);
    }
    let (l, el) = refine(rule, f, (a, mid), left, (0.5 * tol, rel), depth - 1);
    let (r, er) = refine(rule, f, (mid, b), right, (0.5 * tol, rel), depth - 1);
    (l + r, el + er)
}

/// Barycentric weights for interpolation at `nodes`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &xm)| xj - xm)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of all Lagrange basis polynomials at `x`, written into `out`.
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[j] = 1.0;
        return;
    }
    let mut denom = 0.0;
    for ((o, &xj), &wj) in out.iter_mut().zip(nodes).zip(bary) {
        *o = wj / (x - xj);
        denom += *o;
    }
    out.iter_mut().for_each(|v| *v /= denom);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(16);
        let sum_w: f64 = rule.weights.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        // degree 31 polynomial: x^30 integrates to 2/31
        let v = rule.integrate(-1.0, 1.0, |x| Complex64::new(x.powi(30), 0.0));
        assert!((v.re - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_log_endpoint() {
        let rule = TanhSinh::new(6);
        // ∫_0^1 ln x dx = -1
        let v = rule.integrate(0.0, 1.0, |_, da, _| Complex64::new(da.ln(), 0.0));
        assert!((v.re + 1.0).abs() < 1e-13, "{}", v.re);
    }

    #[test]
    fn adaptive_gauss_resolves_peak() {
        // ∫_0^1 1/(1e-4 + x^2) dx = atan(100)/1e-2
        let mut f = |x: f64| Complex64::new(1.0 / (1e-4 + x * x), 0.0);
        let (v, _) = adaptive_gauss(&mut f, 0.0, 1.0, 1e-12, 0.0, 40);
        let exact = 100f64.atan() / 1e-2;
        assert!((v.re - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn lagrange_basis_reproduces_cubic() {
        let rule = GaussLegendre::new(6);
        let bary = barycentric_weights(&rule.nodes);
        let mut basis = vec![0.0; 6];
        lagrange_basis(&rule.nodes, &bary, 0.37, &mut basis);
        let interp: f64 = rule
            .nodes
            .iter()
            .zip(&basis)
            .map(|(&x, &l)| (x * x * x - x) * l)
            .sum();
        assert!((interp - (0.37f64.powi(3) - 0.37)).abs() < 1e-14);
    }
}
