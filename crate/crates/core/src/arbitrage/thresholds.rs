use serde::{Deserialize, Serialize};

use super::ArbitrageError;
use crate::measure::{default_ladder, DEFAULT_N_BLOCKS, DEFAULT_THRESHOLD};
use crate::numerics::DEFAULT_PINV_TOL;

/// Every tolerance that a verdict depends on. Embedded in each verdict so a
/// report can be reproduced from its own contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest `sum |nu| dB` per path, relative to the drift scale, still
    /// read as `nu = 0`.
    pub tol_nu: f64,
    /// Fine/coarse trade-off ratio that counts as divergence.
    pub rho_div: f64,
    /// Trade-off level that, together with `rho_div`, counts as divergence.
    pub k_max: f64,
    /// Per-step decrease allowed for a non-decreasing gains process,
    /// relative to `max(1, max |G|)` on the path.
    pub tol_mono: f64,
    /// Terminal gain that counts as strictly positive.
    pub eps_pos: f64,
    /// Threshold on `Z_{tau-}` separating jumps from continuous approach;
    /// `None` selects `5 sqrt(max dt)`.
    pub eps_jump: Option<f64>,
    pub ladder: Vec<u32>,
    /// Initial capitals at which a first-kind family is checked.
    pub v_ladder: Vec<f64>,
    /// Wilson lower bound on the fraction of positive terminal gains that a
    /// certificate must exceed.
    pub min_positive_fraction: f64,
    /// Slack on admissibility and terminal non-negativity.
    pub tol_admissible: f64,
    /// Largest measure of paths allowed to violate terminal non-negativity
    /// in an arbitrage-opportunity certificate.
    pub max_violation_mass: f64,
    pub pinv_tol: f64,
    pub diagnostic_threshold: f64,
    pub n_blocks: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tol_nu: 1e-8,
            rho_div: 1.5,
            k_max: 1e6,
            tol_mono: 1e-9,
            eps_pos: 1e-6,
            eps_jump: None,
            ladder: default_ladder(),
            v_ladder: vec![1.0, 0.5, 0.25, 0.125],
            min_positive_fraction: 0.0,
            tol_admissible: 1e-9,
            max_violation_mass: 0.0,
            pinv_tol: DEFAULT_PINV_TOL,
            diagnostic_threshold: DEFAULT_THRESHOLD,
            n_blocks: DEFAULT_N_BLOCKS,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ArbitrageError> {
        let positive = [
            ("tol_nu", self.tol_nu),
            ("rho_div", self.rho_div),
            ("k_max", self.k_max),
            ("tol_mono", self.tol_mono),
            ("eps_pos", self.eps_pos),
            ("tol_admissible", self.tol_admissible),
            ("pinv_tol", self.pinv_tol),
            ("diagnostic_threshold", self.diagnostic_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ArbitrageError::Threshold(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(e) = self.eps_jump {
            if !(e > 0.0) || !e.is_finite() {
                return Err(ArbitrageError::Threshold("eps_jump", format!("must be positive, got {e}")));
            }
        }
        for (name, v) in [
            ("min_positive_fraction", self.min_positive_fraction),
            ("max_violation_mass", self.max_violation_mass),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(ArbitrageError::Threshold(name, format!("must lie in [0, 1), got {v}")));
            }
        }
        if self.ladder.is_empty() || self.ladder.contains(&0) {
            return Err(ArbitrageError::Threshold("ladder", "must be non-empty with positive entries".into()));
        }
        if self.v_ladder.is_empty() || self.v_ladder.iter().any(|v| !(*v > 0.0)) {
            return Err(ArbitrageError::Threshold("v_ladder", "must be non-empty with positive entries".into()));
        }
        if self.n_blocks == 0 {
            return Err(ArbitrageError::Threshold("n_blocks", "must be positive".into()));
        }
        Ok(())
    }

    pub fn eps_jump_for(&self, max_dt: f64) -> f64 {
        self.eps_jump.unwrap_or_else(|| crate::measure::default_eps_jump(max_dt))
    }
}
