use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::LabError;

/// Names of the ledger entries.
pub mod names {
    /// Shape estimate `𝔥 ≤ C (ln ln 1/ε)^{−κ}`.
    pub const C: &str = "C";
    pub const KAPPA: &str = "kappa";
    /// Vanishing order behind `kappa`.
    pub const ORDER: &str = "N";
    /// Near-field error `ε₁ ≤ exp(−C_a(−ln ε)^{1/2})`.
    pub const C_A: &str = "C_a";
    /// Boundary estimate `sup(|w| + |∇w|) ≤ C_b (ln ln 1/ε)^{−1/2}`.
    pub const C_B: &str = "C_b";
    /// `sup |w| ≤ C_f (ln|ln ε₁|)^{−α}` on the corner edges.
    pub const C_F: &str = "C_f";
    pub const C_S: &str = "C_s";
    /// Three-sphere exponent.
    pub const BETA: &str = "beta";
    pub const C1: &str = "c1";
    /// Corner integral identity bounds, one per term.
    pub const CORNER_TERMS: [&str; 10] = ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10"];
    /// Floor of `|functional|·τ^N` over a `τ` sweep.
    pub const C_LOWER: &str = "C_N_k_theta0";
    pub const C_P: &str = "C_P";
    pub const VARSIGMA: &str = "varsigma";
    /// Direct-problem stability `|u_K − u_K′| ≤ C₁ 𝔥^ς |x|^{−1}`.
    pub const C_DIRECT: &str = "C1_direct";
    /// `‖u‖_{L²(B_{R+1}∖K)} ≤ ℰ`.
    pub const ENERGY: &str = "E";
    /// Sup-norm surrogate for the Hölder bound on `B_R∖K`.
    pub const ENERGY_R: &str = "E_R";
    pub const ENERGY_H: &str = "E_H";
    /// `‖u‖_{L²(B_δ(x₀)∖K)} ≥ ℰ_L`.
    pub const ENERGY_L: &str = "E_L";
    /// `(∫_{Γ_h}|u|²)^{β_B} ≥ ℰ_B`.
    pub const ENERGY_B: &str = "E_B";
    pub const BETA_B: &str = "beta_B";
    /// Exponent of `ψ`.
    pub const ALPHA: &str = "alpha";
    /// Radius of the ball containing both obstacles.
    pub const R: &str = "R";
}

/// One fitted value of a named constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub value: f64,
    pub run: String,
    pub note: String,
}

/// Named fitted constants. Every value carries the run that produced it; a refit
/// in a later run is appended, so earlier values stay visible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    constants: BTreeMap<String, Vec<Fit>>,
}

impl ConstantsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, name: &str, value: f64, run: &str, note: impl Into<String>) -> Result<(), LabError> {
        let fits = self.constants.entry(name.to_string()).or_default();
        if fits.iter().any(|f| f.run == run) {
            return Err(LabError::AlreadyFitted { name: name.to_string(), run: run.to_string() });
        }
        fits.push(Fit { value, run: run.to_string(), note: note.into() });
        Ok(())
    }

    pub fn latest(&self, name: &str) -> Option<&Fit> {
        self.constants.get(name).and_then(|f| f.last())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.latest(name).map(|f| f.value)
    }

    pub fn require(&self, name: &str) -> Result<f64, LabError> {
        self.get(name).ok_or_else(|| LabError::MissingConstant(name.to_string()))
    }

    pub fn history(&self, name: &str) -> &[Fit] {
        self.constants.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.constants.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    /// Number of distinct runs that recorded something.
    pub fn run_count(&self) -> usize {
        let mut runs: Vec<&str> = self.constants.values().flatten().map(|f| f.run.as_str()).collect();
        runs.sort_unstable();
        runs.dedup();
        runs.len()
    }

    /// A run identifier not yet used in this ledger.
    pub fn next_run(&self, verb: &str, detail: &str, seed: u64) -> String {
        format!("{verb}/{detail}/seed={seed}/run={}", self.run_count() + 1)
    }

    /// Structured-text snapshot (TOML), one array of fits per constant.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("ledger entries are plain tables")
    }

    pub fn from_snapshot(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))
    }
}
