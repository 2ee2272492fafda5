use serde::{Deserialize, Serialize};

use super::Thresholds;
use crate::measure::Decomposition;
use crate::numerics::compensated::NeumaierSum;
use crate::par;
use crate::paths::{GridProcess, PathsError};

/// Mean-variance trade-off `K_t = sum lambda' c lambda dB` per path, with
/// refinement-based divergence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffReport {
    /// Full `K` paths; dropped when reports from several bundles are merged.
    pub k_hat: Option<GridProcess>,
    pub terminal: Vec<f64>,
    pub mask: Vec<bool>,
    /// `K_T(fine) / K_T(coarse) > rho_div` and `K_T(fine) > k_max`.
    pub divergence: Vec<bool>,
    /// Left end of the first coarse interval whose refined increment
    /// diverges; `None` is `+inf`.
    pub sigma_estimate: Vec<Option<f64>>,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSummary {
    pub checked_paths: usize,
    pub refined: bool,
    pub divergent_paths: usize,
    pub divergence_fraction: f64,
    pub finite_sigma_paths: usize,
    pub terminal_mean: f64,
    pub terminal_max: f64,
}

fn cumulative(dec: &Decomposition, p: usize) -> Vec<f64> {
    let n = dec.steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    if !dec.mask[p] {
        out.resize(n + 1, 0.0);
        return out;
    }
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        acc.add(dec.c_quadratic(p, i, dec.lambda.get(p, i)).max(0.0) * dec.db[i]);
        out.push(acc.value());
    }
    out
}

/// Trade-off of `decomp`; when `partner` (the same paths on a grid refined or
/// coarsened by an integer factor) is given, the two are compared to flag
/// divergence and estimate the explosion time.
pub fn mean_variance_tradeoff(
    decomp: &Decomposition,
    partner: Option<&Decomposition>,
    th: &Thresholds,
) -> Result<TradeoffReport, PathsError> {
    let m = decomp.n_paths();
    let n = decomp.steps();
    let paths = par::map_indexed(m, |p| cumulative(decomp, p));
    let terminal: Vec<f64> = paths.iter().map(|k| k[n]).collect();
    let mut divergence = vec![false; m];
    let mut sigma_estimate = vec![None; m];

    if let Some(other) = partner {
        if other.n_paths() != m {
            return Err(PathsError::Shape {
                what: "partner paths",
                expected: m,
                found: other.n_paths(),
            });
        }
        let (coarse, fine, coarse_is_self) = if other.steps() > n {
            (decomp, other, true)
        } else {
            (other, decomp, false)
        };
        let nc = coarse.steps();
        if nc == 0 || fine.steps() % nc != 0 {
            return Err(PathsError::InvalidGrid("partner grid is not nested".into()));
        }
        let factor = fine.steps() / nc;
        let flags = par::map_indexed(m, |p| {
            if !decomp.mask[p] {
                return (false, None);
            }
            let (kc_own, kf_own);
            let (kc, kf) = if coarse_is_self {
                kf_own = cumulative(fine, p);
                (&paths[p], &kf_own)
            } else {
                kc_own = cumulative(coarse, p);
                (&kc_own, &paths[p])
            };
            let (tc, tf) = (kc[nc], kf[fine.steps()]);
            let diverges = tf > th.k_max && tf > th.rho_div * tc;
            let sigma = (0..nc).find_map(|j| {
                let inc_c = kc[j + 1] - kc[j];
                let inc_f = kf[(j + 1) * factor] - kf[j * factor];
                (inc_f > th.k_max && inc_f > th.rho_div * inc_c).then(|| coarse.grid().time(j))
            });
            (diverges, sigma)
        });
        for (p, (d, s)) in flags.into_iter().enumerate() {
            divergence[p] = d;
            sigma_estimate[p] = s;
        }
    }

    let k_hat = GridProcess::from_values(decomp.grid().clone(), m, 1, paths.into_iter().flatten().collect())?;
    Ok(TradeoffReport {
        k_hat: Some(k_hat),
        terminal,
        mask: decomp.mask.clone(),
        divergence,
        sigma_estimate,
        refined: partner.is_some(),
    })
}

impl TradeoffReport {
    /// Concatenates the paths of `other`; full `K` paths are dropped.
    pub fn append(&mut self, other: TradeoffReport) {
        self.k_hat = None;
        self.terminal.extend(other.terminal);
        self.mask.extend(other.mask);
        self.divergence.extend(other.divergence);
        self.sigma_estimate.extend(other.sigma_estimate);
        self.refined &= other.refined;
    }

    pub fn empty(refined: bool) -> Self {
        Self {
            k_hat: None,
            terminal: vec![],
            mask: vec![],
            divergence: vec![],
            sigma_estimate: vec![],
            refined,
        }
    }

    pub fn summary(&self) -> TradeoffSummary {
        let idx: Vec<usize> = (0..self.mask.len()).filter(|&p| self.mask[p]).collect();
        let checked = idx.len();
        let divergent = idx.iter().filter(|&&p| self.divergence[p]).count();
        let finite_sigma = idx.iter().filter(|&&p| self.sigma_estimate[p].is_some()).count();
        let ks: Vec<f64> = idx.iter().map(|&p| self.terminal[p]).collect();
        TradeoffSummary {
            checked_paths: checked,
            refined: self.refined,
            divergent_paths: divergent,
            divergence_fraction: if checked > 0 { divergent as f64 / checked as f64 } else { 0.0 },
            finite_sigma_paths: finite_sigma,
            terminal_mean: if checked > 0 {
                crate::numerics::stats::pairwise_sum(&ks) / checked as f64
            } else {
                0.0
            },
            terminal_max: ks.iter().cloned().fold(0.0, f64::max),
        }
    }
}
