//! The model catalog: specifications, exact samplers, analytic
//! characteristics and canonical density processes.

mod characteristics;
mod density;
mod sampler;

use serde::{Deserialize, Serialize};

pub use characteristics::{characteristics, Characteristics};
pub use density::{density_process, DensitySpec};
pub use sampler::{simulate, simulate_range};

/// Aux series names written by the samplers.
pub mod aux {
    /// Exact jump time of the single-jump models (per path).
    pub const XI: &str = "xi";
    /// Density process recorded alongside exp_default paths (per time).
    pub const Z: &str = "Z";
    /// Compensator `rate * (t ∧ xi)` of the jump indicator (per time).
    pub const B: &str = "B";
    /// First component of the driving Brownian motion (per time).
    pub const W1: &str = "W1";
    pub use crate::paths::AUX_ABSORPTION_INDEX as ABSORPTION_INDEX;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `S = s0 + mu t + sigma W` with a `d`-dimensional Brownian motion.
    DriftedBm { mu: Vec<f64>, sigma: Vec<f64>, s0: Vec<f64> },
    /// Brownian motion from `s0 > 0` absorbed at zero.
    StoppedBm { s0: f64 },
    /// Three-dimensional Bessel process from `x0`.
    Bes3 { x0: f64 },
    /// `S = 1{xi > t} e^{rate t}` with `xi ~ Exp(rate)`.
    ExpDefault { rate: f64 },
    /// `S = rate (t ∧ xi) - 1{t >= xi}` with `xi ~ Exp(rate)`.
    CompensatorModel { rate: f64 },
    /// `dS^1 = dW`, `dS^2 = dt`: a drift living in the kernel of `c`.
    KernelDrift,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

impl ModelSpec {
    pub fn drifted_bm_1d(mu: f64, sigma: f64) -> Self {
        Self::DriftedBm {
            mu: vec![mu],
            sigma: vec![sigma],
            s0: vec![0.0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DriftedBm { .. } => "drifted_bm",
            Self::StoppedBm { .. } => "stopped_bm",
            Self::Bes3 { .. } => "bes3",
            Self::ExpDefault { .. } => "exp_default",
            Self::CompensatorModel { .. } => "compensator_model",
            Self::KernelDrift => "kernel_drift",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::DriftedBm { mu, .. } => mu.len(),
            Self::KernelDrift => 2,
            _ => 1,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            Self::DriftedBm { s0, .. } => s0.clone(),
            Self::StoppedBm { s0 } => vec![*s0],
            Self::Bes3 { x0 } => vec![*x0],
            Self::ExpDefault { .. } => vec![1.0],
            Self::CompensatorModel { .. } => vec![0.0],
            Self::KernelDrift => vec![0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::DriftedBm { mu, sigma, s0 } => {
                let d = mu.len();
                if d == 0 || d > 64 {
                    return Err(invalid("mu", format!("dimension must be in 1..=64, got {d}")));
                }
                if sigma.len() != d * d {
                    return Err(invalid("sigma", format!("expected {} entries, got {}", d * d, sigma.len())));
                }
                if s0.len() != d {
                    return Err(invalid("s0", format!("expected {d} entries, got {}", s0.len())));
                }
                if !finite(mu) || !finite(sigma) || !finite(s0) {
                    return Err(invalid("mu", "parameters must be finite"));
                }
            }
            Self::StoppedBm { s0 } => {
                if !(*s0 > 0.0) || !s0.is_finite() {
                    return Err(invalid("s0", format!("start must be positive, got {s0}")));
                }
            }
            Self::Bes3 { x0 } => {
                if !(*x0 >= 0.0) || !x0.is_finite() {
                    return Err(invalid("x0", format!("start must be non-negative, got {x0}")));
                }
            }
            Self::ExpDefault { rate } | Self::CompensatorModel { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(invalid("rate", format!("rate must be positive, got {rate}")));
                }
            }
            Self::KernelDrift => {}
        }
        Ok(())
    }

    /// Jump intensity of the single-jump models.
    pub fn jump_rate(&self) -> Option<f64> {
        match self {
            Self::ExpDefault { rate } | Self::CompensatorModel { rate } => Some(*rate),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelSpec::StoppedBm { s0: 0.0 }.validate().is_err());
        assert!(ModelSpec::ExpDefault { rate: -1.0 }.validate().is_err());
        assert!(ModelSpec::DriftedBm {
            mu: vec![0.0, 0.0],
            sigma: vec![1.0, 0.0, 0.0],
            s0: vec![0.0, 0.0]
        }
        .validate()
        .is_err());
        assert!(ModelSpec::drifted_bm_1d(0.1, 0.2).validate().is_ok());
        assert!(ModelSpec::KernelDrift.validate().is_ok());
    }

    #[test]
    fn dims_and_names() {
        assert_eq!(ModelSpec::KernelDrift.dim(), 2);
        assert_eq!(ModelSpec::Bes3 { x0: 1.0 }.name(), "bes3");
    }
}
