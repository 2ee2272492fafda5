use serde::{Deserialize, Serialize};

use super::{aux, ModelError, ModelSpec};
use crate::paths::{PathBundle, PathsError};

/// A density process `Z_t = dQ/dP |_{F_t}` expressed in terms of a model's
/// paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `Z ≡ 1`.
    Unit,
    /// `Z = S / S_0` for a non-negative scalar martingale price.
    PriceItself,
    /// `Z = 1{xi > t} e^{rate t}` built from the model's jump time.
    DefaultIndicator { rate: f64 },
    /// `Z = exp(theta0 W^1_t - theta0^2 t / 2)`.
    Exponential { theta0: f64 },
    /// `Z = 1 + amplitude sin(k W^1_t) exp(-k^2 (T - t) / 2)`, bounded in
    /// `[1 - amplitude, 1 + amplitude]`.
    BoundedSine { k: f64, amplitude: f64 },
}

/// The density the catalog associates with a model, if any.
pub fn density_process(model: &ModelSpec) -> Option<DensitySpec> {
    match model {
        ModelSpec::StoppedBm { .. } => Some(DensitySpec::PriceItself),
        ModelSpec::ExpDefault { rate } | ModelSpec::CompensatorModel { rate } => {
            Some(DensitySpec::DefaultIndicator { rate: *rate })
        }
        _ => None,
    }
}

fn incompatible(reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: "measure_change",
        reason: reason.into(),
    }
}

impl DensitySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Unit => "unit",
            Self::PriceItself => "price_itself",
            Self::DefaultIndicator { .. } => "default_indicator",
            Self::Exponential { .. } => "exponential",
            Self::BoundedSine { .. } => "bounded_sine",
        }
    }

    pub fn check_compatible(&self, model: &ModelSpec) -> Result<(), ModelError> {
        match self {
            Self::Unit => Ok(()),
            Self::PriceItself => match model {
                ModelSpec::StoppedBm { .. } | ModelSpec::ExpDefault { .. } => Ok(()),
                _ => Err(incompatible(format!(
                    "{} is not a non-negative martingale price",
                    model.name()
                ))),
            },
            Self::DefaultIndicator { rate } => match model.jump_rate() {
                Some(r) if r == *rate => Ok(()),
                Some(r) => Err(incompatible(format!("density rate {rate} differs from the jump rate {r}"))),
                None => Err(incompatible(format!("{} has no jump time", model.name()))),
            },
            Self::Exponential { theta0 } => {
                if !theta0.is_finite() {
                    return Err(incompatible("theta0 must be finite"));
                }
                Self::needs_w1(model)
            }
            Self::BoundedSine { k, amplitude } => {
                if !(k.is_finite() && *amplitude >= 0.0 && *amplitude < 1.0) {
                    return Err(incompatible("bounded_sine needs finite k and 0 <= amplitude < 1"));
                }
                Self::needs_w1(model)
            }
        }
    }

    fn needs_w1(model: &ModelSpec) -> Result<(), ModelError> {
        match model {
            ModelSpec::DriftedBm { .. } | ModelSpec::KernelDrift => Ok(()),
            _ => Err(incompatible(format!(
                "{} does not expose its driving Brownian motion",
                model.name()
            ))),
        }
    }

    /// Whether `Z` is bounded away from zero (so `Q ~ P`).
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Self::Unit | Self::Exponential { .. } | Self::BoundedSine { .. })
    }

    fn w1(model: &ModelSpec, bundle: &PathBundle, p: usize) -> Result<Vec<f64>, PathsError> {
        match model {
            ModelSpec::KernelDrift => Ok((0..bundle.grid().len()).map(|i| bundle.value(p, i, 0)).collect()),
            _ => Ok(bundle.aux_path(aux::W1, p)?.to_vec()),
        }
    }

    /// `Z` along path `p` at every grid time.
    pub fn z_path(&self, model: &ModelSpec, bundle: &PathBundle, p: usize) -> Result<Vec<f64>, PathsError> {
        let times = bundle.grid().times();
        let horizon = bundle.grid().horizon();
        match self {
            Self::Unit => Ok(vec![1.0; times.len()]),
            Self::PriceItself => {
                let s0 = bundle.value(p, 0, 0);
                Ok((0..times.len()).map(|i| bundle.value(p, i, 0) / s0).collect())
            }
            Self::DefaultIndicator { rate } => {
                if let (ModelSpec::ExpDefault { .. }, Ok(z)) = (model, bundle.aux_path(aux::Z, p)) {
                    return Ok(z.to_vec());
                }
                let xi = bundle.aux_scalar(aux::XI, p)?;
                Ok(times
                    .iter()
                    .map(|&t| if xi > t { (rate * t).exp() } else { 0.0 })
                    .collect())
            }
            Self::Exponential { theta0 } => {
                let w = Self::w1(model, bundle, p)?;
                Ok(times
                    .iter()
                    .zip(&w)
                    .map(|(&t, &wt)| (theta0 * wt - 0.5 * theta0 * theta0 * t).exp())
                    .collect())
            }
            Self::BoundedSine { k, amplitude } => {
                let w = Self::w1(model, bundle, p)?;
                Ok(times
                    .iter()
                    .zip(&w)
                    .map(|(&t, &wt)| 1.0 + amplitude * (k * wt).sin() * (-0.5 * k * k * (horizon - t)).exp())
                    .collect())
            }
        }
    }

    /// Exact time at which `Z` reaches zero on path `p`, when the model
    /// provides it: the jump time for default-type densities, the grid time of
    /// absorption for a stopped price.
    pub fn exact_zero_time(&self, model: &ModelSpec, bundle: &PathBundle, p: usize) -> Option<f64> {
        let horizon = bundle.grid().horizon();
        match (self, model) {
            (Self::DefaultIndicator { .. }, _) | (Self::PriceItself, ModelSpec::ExpDefault { .. }) => {
                let xi = bundle.aux_scalar(aux::XI, p).ok()?;
                (xi <= horizon).then_some(xi)
            }
            (Self::PriceItself, ModelSpec::StoppedBm { .. }) => {
                let k = bundle.aux_scalar(aux::ABSORPTION_INDEX, p).ok()?;
                (k >= 0.0).then(|| bundle.grid().time(k as usize))
            }
            _ => None,
        }
    }

    /// Analytic left limit `Z_{tau-}` at a jump to zero, where known.
    pub fn left_limit_at_zero(&self, model: &ModelSpec, bundle: &PathBundle, p: usize) -> Option<f64> {
        let xi = bundle.aux_scalar(aux::XI, p).ok()?;
        match (self, model) {
            (Self::DefaultIndicator { rate }, _) => Some((rate * xi).exp()),
            (Self::PriceItself, ModelSpec::ExpDefault { rate }) => Some((rate * xi).exp()),
            _ => None,
        }
    }

    /// Relative jump `dZ / Z_-` of the density at the model's jump.
    pub fn relative_jump_at_model_jump(&self, model: &ModelSpec) -> f64 {
        match (self, model) {
            (Self::DefaultIndicator { .. }, _) | (Self::PriceItself, ModelSpec::ExpDefault { .. }) => -1.0,
            _ => 0.0,
        }
    }

    /// `d<S, Z>/dB` at time `t` (per price component), given the first
    /// column of `c` divided by `S_0`, the loadings on `W^1`, `Z_t` and
    /// `W^1_t`.
    pub fn covariation_density(
        &self,
        t: f64,
        horizon: f64,
        c_col0_over_s0: &[f64],
        loading_w1: &[f64],
        z: f64,
        w1: f64,
    ) -> Vec<f64> {
        let mut out = vec![0.0; loading_w1.len()];
        self.covariation_density_into(t, horizon, c_col0_over_s0, loading_w1, z, w1, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub fn covariation_density_into(
        &self,
        t: f64,
        horizon: f64,
        c_col0_over_s0: &[f64],
        loading_w1: &[f64],
        z: f64,
        w1: f64,
        out: &mut [f64],
    ) {
        match self {
            Self::Unit | Self::DefaultIndicator { .. } => out.fill(0.0),
            Self::PriceItself => out.copy_from_slice(c_col0_over_s0),
            Self::Exponential { theta0 } => {
                for (o, l) in out.iter_mut().zip(loading_w1) {
                    *o = l * theta0 * z;
                }
            }
            Self::BoundedSine { k, amplitude } => {
                let dz_dw = amplitude * k * (k * w1).cos() * (-0.5 * k * k * (horizon - t)).exp();
                for (o, l) in out.iter_mut().zip(loading_w1) {
                    *o = l * dz_dw;
                }
            }
        }
    }

    /// Driving Brownian path on path `p` (zeros when the density does not
    /// use it).
    pub fn w1_path(&self, model: &ModelSpec, bundle: &PathBundle, p: usize) -> Vec<f64> {
        match self {
            Self::Exponential { .. } | Self::BoundedSine { .. } => {
                Self::w1(model, bundle, p).unwrap_or_else(|_| vec![0.0; bundle.grid().len()])
            }
            _ => vec![0.0; bundle.grid().len()],
        }
    }
}
