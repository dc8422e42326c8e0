use num_rational::Ratio;

use super::{names, ConstantsLedger, LabError};

/// Exponent `κ(N)` of the shape stability estimate: `1/5` for `N = 0`,
/// `1/(2(N²+2N−1))` for `N ≥ 1`.
pub fn kappa(n: u32) -> Ratio<u128> {
    if n == 0 {
        return Ratio::new(1, 5);
    }
    let n = u128::from(n);
    Ratio::new(1, 2 * (n * n + 2 * n - 1))
}

pub fn kappa_f64(n: u32) -> f64 {
    let k = kappa(n);
    *k.numer() as f64 / *k.denom() as f64
}

/// `ln ln(1/ε)` for `ε ∈ (0, 1/e)`.
pub fn lnln_inv(eps: f64) -> Option<f64> {
    let l = -eps.ln();
    (eps > 0.0 && l > 1.0).then(|| l.ln())
}

/// `(ln ln(1/ε))^{−κ}`.
pub fn bound_shape(eps: f64, kappa: f64) -> Option<f64> {
    lnln_inv(eps).map(|x| x.powf(-kappa))
}

/// Constants of the impedance stability function
/// `ψ(ε) = C_P {ln|ln[exp(−C_a(−ln ε)^{1/2}) + (C/R)(ln ln 1/ε)^{−ςκ}]|}^{−α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiConstants {
    pub c_p: f64,
    pub c_a: f64,
    /// Constant of the shape estimate.
    pub c: f64,
    pub r: f64,
    pub varsigma: f64,
    pub kappa: f64,
    pub alpha: f64,
}

impl PsiConstants {
    pub fn from_ledger(ledger: &ConstantsLedger) -> Result<Self, LabError> {
        Ok(Self {
            c_p: ledger.require(names::C_P)?,
            c_a: ledger.require(names::C_A)?,
            c: ledger.require(names::C)?,
            r: ledger.require(names::R)?,
            varsigma: ledger.require(names::VARSIGMA)?,
            kappa: ledger.require(names::KAPPA)?,
            alpha: ledger.require(names::ALPHA)?,
        })
    }

    /// The bracket `exp(−C_a L^{1/2}) + (C/R)(ln L)^{−ςκ}` with `L = ln(1/ε)`.
    pub fn bracket_ln(&self, ln_inv_eps: f64) -> f64 {
        (-self.c_a * ln_inv_eps.sqrt()).exp() + self.c / self.r * ln_inv_eps.ln().powf(-self.varsigma * self.kappa)
    }

    /// `ψ` as a function of `L = ln(1/ε)`, which reaches far below the smallest `f64`.
    pub fn eval_ln(&self, ln_inv_eps: f64) -> Result<f64, LabError> {
        let eps = (-ln_inv_eps).exp();
        let domain = |reason: &str| Err(LabError::Domain { eps, reason: reason.to_string() });
        if !(ln_inv_eps > 1.0) || ln_inv_eps.is_infinite() {
            return domain("need 0 < eps < 1/e");
        }
        // log of the bracket, summed in log space so exp(−C_a L^{1/2}) may underflow
        let decay = -self.c_a * ln_inv_eps.sqrt();
        let shape = (self.c / self.r).ln() - self.varsigma * self.kappa * ln_inv_eps.ln().ln();
        let (hi, lo) = if decay >= shape { (decay, shape) } else { (shape, decay) };
        let ln_b = if hi == f64::NEG_INFINITY { hi } else { hi + (lo - hi).exp().ln_1p() };
        if !(ln_b < 0.0 && ln_b > f64::NEG_INFINITY) {
            return domain("the bracket is not in (0, 1)");
        }
        let inner = (-ln_b).ln();
        if !(inner > 0.0) {
            return domain("ln|ln bracket| is not positive (bracket >= 1/e)");
        }
        Ok(self.c_p * inner.powf(-self.alpha))
    }

    pub fn eval(&self, eps: f64) -> Result<f64, LabError> {
        if !(eps > 0.0) {
            return Err(LabError::Domain { eps, reason: "need eps > 0".into() });
        }
        self.eval_ln(-eps.ln())
    }
}

/// `ψ(ε)` with the constants recorded in `ledger`.
pub fn psi(eps: f64, ledger: &ConstantsLedger) -> Result<f64, LabError> {
    PsiConstants::from_ledger(ledger)?.eval(eps)
}
