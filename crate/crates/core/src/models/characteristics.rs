use super::ModelSpec;
use crate::numerics::SymMatrix;

/// Analytic characteristics `(a, c, B)` of a catalog model relative to the
/// clock `B_t = t`, as functions of time and the current (left-limit) state.
///
/// For the single-jump models the drift is the canonical one: the drift
/// between jumps plus intensity times jump size.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    model: ModelSpec,
    /// `sigma sigma'` for drifted Brownian motion, formed once.
    gram: Option<SymMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    pub rate: f64,
}

pub fn characteristics(model: &ModelSpec) -> Characteristics {
    let gram = match model {
        ModelSpec::DriftedBm { mu, sigma, .. } => Some(SymMatrix::gram(mu.len(), sigma)),
        _ => None,
    };
    Characteristics {
        model: model.clone(),
        gram,
    }
}

impl Characteristics {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn b_increment(&self, t0: f64, t1: f64) -> f64 {
        t1 - t0
    }

    pub fn jump_spec(&self) -> Option<JumpSpec> {
        self.model.jump_rate().map(|rate| JumpSpec { rate })
    }

    /// Whether the single jump has not happened yet at state `x`.
    pub fn jump_pending(&self, t: f64, x: &[f64]) -> bool {
        match self.model {
            ModelSpec::ExpDefault { .. } => x[0] > 0.0,
            ModelSpec::CompensatorModel { rate } => x[0] == rate * t,
            _ => false,
        }
    }

    /// Drift of the continuous part only (no jump compensation).
    pub fn continuous_drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.continuous_drift_into(t, x, &mut out);
        out
    }

    pub fn continuous_drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.model {
            ModelSpec::DriftedBm { mu, .. } => out.copy_from_slice(mu),
            ModelSpec::StoppedBm { .. } => out[0] = 0.0,
            ModelSpec::Bes3 { .. } => out[0] = if x[0] > 0.0 { 1.0 / x[0] } else { 0.0 },
            ModelSpec::ExpDefault { rate } => out[0] = if x[0] > 0.0 { rate * (rate * t).exp() } else { 0.0 },
            ModelSpec::CompensatorModel { rate } => out[0] = if self.jump_pending(t, x) { *rate } else { 0.0 },
            ModelSpec::KernelDrift => {
                out[0] = 0.0;
                out[1] = 1.0;
            }
        }
    }

    /// Size of the single jump if it happened at state `x`.
    pub fn jump_size(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        match self.model {
            ModelSpec::ExpDefault { .. } => vec![-x[0]],
            ModelSpec::CompensatorModel { .. } => vec![-1.0],
            _ => vec![0.0; self.dim()],
        }
    }

    pub fn jump_intensity(&self, t: f64, x: &[f64]) -> f64 {
        match self.jump_spec() {
            Some(j) if self.jump_pending(t, x) => j.rate,
            _ => 0.0,
        }
    }

    /// Total drift with the jump intensity scaled by `intensity_factor`
    /// (1 under the sampling measure).
    pub fn drift_with_intensity(&self, t: f64, x: &[f64], intensity_factor: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.drift_with_intensity_into(t, x, intensity_factor, &mut out);
        out
    }

    pub fn drift_with_intensity_into(&self, t: f64, x: &[f64], intensity_factor: f64, out: &mut [f64]) {
        self.continuous_drift_into(t, x, out);
        let kappa = self.jump_intensity(t, x) * intensity_factor;
        if kappa != 0.0 {
            let size = match self.model {
                ModelSpec::ExpDefault { .. } => -x[0],
                ModelSpec::CompensatorModel { .. } => -1.0,
                _ => 0.0,
            };
            out[0] += kappa * size;
        }
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.drift_with_intensity(t, x, 1.0)
    }

    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.drift_with_intensity_into(t, x, 1.0, out)
    }

    /// Diffusion matrix `c` of the continuous martingale part.
    pub fn diffusion(&self, t: f64, x: &[f64]) -> SymMatrix {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.diffusion_into(t, x, &mut out);
        SymMatrix::new(d, out).expect("model diffusions are symmetric")
    }

    /// Row-major `c` written into `out`.
    pub fn diffusion_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.model {
            ModelSpec::DriftedBm { .. } => {
                out.copy_from_slice(self.gram.as_ref().expect("formed at construction").as_slice())
            }
            ModelSpec::StoppedBm { .. } => out[0] = if x[0] > 0.0 { 1.0 } else { 0.0 },
            ModelSpec::Bes3 { .. } => out[0] = 1.0,
            ModelSpec::ExpDefault { .. } | ModelSpec::CompensatorModel { .. } => out[0] = 0.0,
            ModelSpec::KernelDrift => out.copy_from_slice(&[1.0, 0.0, 0.0, 0.0]),
        }
    }

    /// Loading of each price component on the first driving Brownian motion.
    pub fn loading_w1(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.loading_w1_into(t, x, &mut out);
        out
    }

    pub fn loading_w1_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.model {
            ModelSpec::DriftedBm { sigma, mu, .. } => {
                let d = mu.len();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = sigma[r * d];
                }
            }
            ModelSpec::StoppedBm { .. } => out[0] = if x[0] > 0.0 { 1.0 } else { 0.0 },
            ModelSpec::KernelDrift => {
                out[0] = 1.0;
                out[1] = 0.0;
            }
            ModelSpec::Bes3 { .. } | ModelSpec::ExpDefault { .. } | ModelSpec::CompensatorModel { .. } => {
                out.fill(0.0)
            }
        }
    }
}
