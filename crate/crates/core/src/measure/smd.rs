//! Statistical check that `L/Z` and `(L/Z) S` behave as local martingales
//! under `Q`.
//!
//! The processes are stopped when `Z` first drops below a localisation level,
//! the horizon is split into blocks, and within each block the `Q`-weighted
//! increments are regressed on `[1, X_start]`. Under the local-martingale
//! hypothesis both coefficients vanish; the diagnostic reports the largest
//! `|coefficient| / stderr` (heteroskedasticity-robust) over all blocks.

use serde::{Deserialize, Serialize};

use super::{reweight, DensityProcess, MeasureError, WeightedExpectation};
use crate::paths::{GridProcess, PathBundle};

pub const DEFAULT_N_BLOCKS: usize = 32;
pub const DEFAULT_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessDiagnostic {
    pub name: String,
    /// `None` encodes `+inf`: a deterministic non-zero drift.
    pub statistic: Option<f64>,
    pub worst_block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmdDiagnostic {
    pub pass: bool,
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub n_blocks: usize,
    pub localisation_level: f64,
    pub processes: Vec<ProcessDiagnostic>,
    /// `E_Q[L_T / Z_T]` without localisation.
    pub terminal_mean: WeightedExpectation,
    pub weighted_paths: usize,
}

/// Collects block increments over one or more bundles.
#[derive(Debug, Clone)]
pub struct SmdAccumulator {
    n_blocks: usize,
    level: f64,
    threshold: f64,
    names: Vec<String>,
    /// `[process][block]` → rows `(y, x, w)`.
    rows: Vec<Vec<Vec<[f64; 3]>>>,
    terminal_payoff: Vec<f64>,
    terminal_z: Vec<f64>,
}

fn block_bounds(steps: usize, n_blocks: usize) -> Vec<(usize, usize)> {
    let k = n_blocks.min(steps).max(1);
    (0..k).map(|b| (b * steps / k, (b + 1) * steps / k)).collect()
}

impl SmdAccumulator {
    pub fn new(dim: usize, n_blocks: usize, level: f64, threshold: f64) -> Self {
        let mut names = vec!["L/Z".to_owned()];
        names.extend((0..dim).map(|i| format!("(L/Z)*S{}", i + 1)));
        Self {
            n_blocks,
            level,
            threshold,
            rows: vec![Vec::new(); names.len()],
            names,
            terminal_payoff: Vec::new(),
            terminal_z: Vec::new(),
        }
    }

    pub fn add(&mut self, l: &GridProcess, z: &DensityProcess, s: &PathBundle) -> Result<(), MeasureError> {
        if l.width() != 1 || l.n_paths() != s.n_paths() || z.n_paths() != s.n_paths() {
            return Err(MeasureError::Shape("L, Z and S must share paths".into()));
        }
        let n = s.grid().steps();
        let blocks = block_bounds(n, self.n_blocks);
        for r in &mut self.rows {
            if r.is_empty() {
                r.resize(blocks.len(), Vec::new());
            }
        }
        let d = s.dim();
        for p in 0..s.n_paths() {
            let lp = l.path(p);
            if lp.iter().any(|v| !(*v > 0.0)) {
                return Err(MeasureError::InvalidDensity(format!("L is not strictly positive on path {p}")));
            }
            let zp = z.path(p);
            let zt = zp[n];
            self.terminal_z.push(zt);
            self.terminal_payoff.push(if zt > 0.0 { lp[n] / zt } else { 0.0 });
            // Localised index: values are frozen from the first time Z < level.
            let stop = zp.iter().position(|v| *v < self.level).unwrap_or(n);
            let idx = |i: usize| i.min(stop);
            for (b, &(start, end)) in blocks.iter().enumerate() {
                let w = zp[end];
                if w <= 0.0 {
                    continue;
                }
                let (i0, i1) = (idx(start), idx(end));
                if zp[i0] <= 0.0 || zp[i1] <= 0.0 {
                    continue;
                }
                let x0 = lp[i0] / zp[i0];
                let x1 = lp[i1] / zp[i1];
                self.rows[0][b].push([x1 - x0, x0, w]);
                for j in 0..d {
                    let y0 = x0 * s.value(p, i0, j);
                    let y1 = x1 * s.value(p, i1, j);
                    self.rows[1 + j][b].push([y1 - y0, y0, w]);
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<SmdDiagnostic, MeasureError> {
        let mut processes = Vec::with_capacity(self.names.len());
        let mut overall: Option<f64> = Some(0.0);
        for (name, blocks) in self.names.iter().zip(&self.rows) {
            let mut worst: Option<f64> = Some(0.0);
            let mut worst_block = 0;
            for (b, rows) in blocks.iter().enumerate() {
                let stat = block_statistic(rows);
                if is_larger(stat, worst) {
                    worst = stat;
                    worst_block = b;
                }
            }
            if is_larger(worst, overall) {
                overall = worst;
            }
            processes.push(ProcessDiagnostic {
                name: name.clone(),
                statistic: worst,
                worst_block,
            });
        }
        let pass = overall.is_some_and(|s| s < self.threshold);
        Ok(SmdDiagnostic {
            pass,
            statistic: overall,
            threshold: self.threshold,
            n_blocks: self.rows.first().map_or(0, Vec::len),
            localisation_level: self.level,
            processes,
            terminal_mean: reweight(&self.terminal_payoff, &self.terminal_z)?,
            weighted_paths: self.terminal_z.iter().filter(|z| **z > 0.0).count(),
        })
    }
}

/// `None` is `+inf`.
fn is_larger(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => false,
        (None, Some(_)) => true,
        (Some(_), None) => false,
        (Some(x), Some(y)) => x > y,
    }
}

/// Largest `|coef| / se` of the weighted regression of `y` on `[1, x]`.
fn block_statistic(rows: &[[f64; 3]]) -> Option<f64> {
    if rows.len() < 2 {
        return Some(0.0);
    }
    let sw: f64 = rows.iter().map(|r| r[2]).sum();
    let xbar = rows.iter().map(|r| r[2] * r[1]).sum::<f64>() / sw;
    let ybar = rows.iter().map(|r| r[2] * r[0]).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r[2] * (r[1] - xbar).powi(2)).sum();
    let scale = rows.iter().map(|r| r[0].abs().max(r[1].abs())).fold(1.0, f64::max);
    let x_spread = sxx / sw;
    let with_slope = x_spread > 1e-20 * scale * scale;

    // Centred regressor: y = a + b (x - xbar); a and b are then uncorrelated
    // in the bread, and a = 0 together with b = 0 is the null.
    let b = if with_slope {
        rows.iter().map(|r| r[2] * (r[1] - xbar) * (r[0] - ybar)).sum::<f64>() / sxx
    } else {
        0.0
    };
    let a = ybar;
    let mut meat = [0.0f64; 3];
    for r in rows {
        let u = r[1] - xbar;
        let e = r[0] - a - b * u;
        let we2 = (r[2] * e).powi(2);
        meat[0] += we2;
        meat[1] += we2 * u;
        meat[2] += we2 * u * u;
    }
    let se_a = meat[0].sqrt() / sw;
    let se_b = if with_slope { meat[2].sqrt() / sxx } else { 0.0 };
    let ratio = |coef: f64, se: f64, unit: f64| -> Option<f64> {
        if se > 1e-12 * unit {
            Some(coef.abs() / se)
        } else if coef.abs() > 1e-9 * unit {
            None
        } else {
            Some(0.0)
        }
    };
    let sa = ratio(a, se_a, scale);
    let sb = if with_slope {
        ratio(b, se_b, scale / x_spread.sqrt())
    } else {
        Some(0.0)
    };
    if is_larger(sa, sb) {
        sa
    } else {
        sb
    }
}

/// Single-bundle form of the diagnostic.
pub fn smd_under_q(
    l: &GridProcess,
    z: &DensityProcess,
    s: &PathBundle,
    level: f64,
    n_blocks: usize,
    threshold: f64,
) -> Result<SmdDiagnostic, MeasureError> {
    let mut acc = SmdAccumulator::new(s.dim(), n_blocks, level, threshold);
    acc.add(l, z, s)?;
    acc.finish()
}
