use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::numerics::stats::pairwise_sum;

/// Monte Carlo estimate of `E_Q[X] = E_P[Z_T X]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedExpectation {
    pub estimate: f64,
    pub stderr: f64,
    pub effective_sample_size: f64,
    pub n_paths: usize,
}

/// Mean of `Z_T * payoff` over all paths. Payoffs on paths with `Z_T = 0`
/// are `Q`-null and are not read.
pub fn reweight(payoff: &[f64], z_t: &[f64]) -> Result<WeightedExpectation, MeasureError> {
    if payoff.len() != z_t.len() {
        return Err(MeasureError::Shape("payoff and weights differ in length".into()));
    }
    let n = z_t.len();
    let mut products = Vec::with_capacity(n);
    for (p, (&x, &w)) in payoff.iter().zip(z_t).enumerate() {
        if w > 0.0 {
            let v = w * x;
            if !v.is_finite() {
                return Err(MeasureError::NonFinitePayoff(p));
            }
            products.push(v);
        } else {
            products.push(0.0);
        }
    }
    let nf = n as f64;
    let mean = pairwise_sum(&products) / nf;
    let dev: Vec<f64> = products.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if n > 1 { pairwise_sum(&dev) / (nf - 1.0) } else { 0.0 };
    let sw = pairwise_sum(z_t);
    let sq: Vec<f64> = z_t.iter().map(|w| w * w).collect();
    let sw2 = pairwise_sum(&sq);
    Ok(WeightedExpectation {
        estimate: mean,
        stderr: (var / nf).sqrt(),
        effective_sample_size: if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 },
        n_paths: n,
    })
}
