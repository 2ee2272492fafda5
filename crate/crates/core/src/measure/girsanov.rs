use serde::{Deserialize, Serialize};

use super::decomposition::{PathRows, PinvCache};
use super::{DensityProcess, Decomposition, MeasureError};
use crate::arbitrage::{mean_variance_tradeoff, Thresholds, TradeoffReport};
use crate::models::{characteristics, DensitySpec, ModelSpec};
use crate::numerics::linalg::{decompose_into, mul_vec_into};
use crate::numerics::stats::pairwise_sum;
use crate::par;
use crate::paths::{GridProcess, PathBundle};

/// Fewest contributing paths per step below which the estimated drift is
/// flagged as too noisy.
pub const MIN_REGRESSION_PATHS: usize = 30;

/// Where the Girsanov integrand `theta` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    /// Closed form from the model and density.
    Analytic,
    /// Cross-path regression fitted on the bundle being transformed.
    Estimated,
    /// Cross-path regression fitted beforehand (e.g. over several chunks).
    Fitted(ThetaRegression),
}

/// Per-step least-squares fit of `dM^j dZ / dB` on `[1, Z_-]`; the fitted
/// value estimates `d<M^j, Z>/dB` as a function of the current density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRegression {
    dim: usize,
    /// Row `i * dim + j`: `[n, sum z, sum z^2, sum y, sum z y]`.
    sums: Vec<[f64; 5]>,
}

impl ThetaRegression {
    pub fn new(steps: usize, dim: usize) -> Self {
        Self {
            dim,
            sums: vec![[0.0; 5]; steps * dim],
        }
    }

    /// Adds the paths of one bundle, in path order.
    pub fn accumulate(&mut self, decomp_p: &Decomposition, z: &DensityProcess, s: &PathBundle) {
        let d = self.dim;
        let n = decomp_p.steps();
        for p in 0..s.n_paths() {
            if !decomp_p.mask[p] {
                continue;
            }
            for i in 0..n {
                let zi = z.at(p, i);
                if zi <= 0.0 {
                    continue;
                }
                let db = decomp_p.db[i];
                let dz = z.at(p, i + 1) - zi;
                let a = decomp_p.drift.get(p, i);
                for j in 0..d {
                    let dm = s.value(p, i + 1, j) - s.value(p, i, j) - a[j] * db;
                    let y = dm * dz / db;
                    let row = &mut self.sums[i * d + j];
                    row[0] += 1.0;
                    row[1] += zi;
                    row[2] += zi * zi;
                    row[3] += y;
                    row[4] += zi * y;
                }
            }
        }
    }

    /// `(intercept, slope)` at step `i`, component `j`. With no spread in
    /// `Z_-` across paths (e.g. at `t = 0`) the slope is zero and the
    /// intercept is the mean.
    pub fn coefficients(&self, i: usize, j: usize) -> (f64, f64) {
        let [n, sz, szz, sy, szy] = self.sums[i * self.dim + j];
        if n == 0.0 {
            return (0.0, 0.0);
        }
        let sxx = szz - sz * sz / n;
        if sxx <= 1e-12 * szz.max(1.0) {
            return (sy / n, 0.0);
        }
        let beta = (szy - sz * sy / n) / sxx;
        ((sy - beta * sz) / n, beta)
    }

    pub fn min_paths(&self) -> usize {
        self.sums.iter().map(|r| r[0] as usize).min().unwrap_or(0)
    }

    pub fn steps(&self) -> usize {
        self.sums.len() / self.dim.max(1)
    }
}

/// Canonical decomposition of `S` under `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QDecomposition {
    pub theta: GridProcess,
    /// `lambda_bar`, `nu_bar`, `c` and the `Q`-drift, on `Q`-charged paths.
    pub decomposition: Decomposition,
    /// `dS - a_bar dB` per step.
    pub m_bar_increments: GridProcess,
    pub variance_warning: bool,
}

impl QDecomposition {
    pub fn lambda_bar(&self) -> &GridProcess {
        &self.decomposition.lambda
    }

    pub fn nu_bar(&self) -> &GridProcess {
        &self.decomposition.nu
    }
}

/// Transforms the `P`-decomposition into the `Q`-decomposition:
/// `lambda_bar = lambda + theta / Z_-` with `theta = c^+ d<M, Z>/dB` and
/// `nu_bar = nu` for the continuous part. For the single-jump models the jump
/// intensity under `Q` is rescaled by `1 + dZ/Z_-`, which changes the drift
/// itself. Only paths with `Z_T > 0` are transformed.
pub fn girsanov(
    decomp_p: &Decomposition,
    z: &DensityProcess,
    s: &PathBundle,
    model: &ModelSpec,
    density: &DensitySpec,
    source: &ThetaSource,
    tol: f64,
) -> Result<QDecomposition, MeasureError> {
    density.check_compatible(model)?;
    let ch = characteristics(model);
    let grid = s.grid();
    let n = grid.steps();
    let d = s.dim();
    let horizon = grid.horizon();
    let fitted;
    let regression = match source {
        ThetaSource::Analytic => None,
        ThetaSource::Estimated => {
            let mut r = ThetaRegression::new(n, d);
            r.accumulate(decomp_p, z, s);
            fitted = r;
            Some(&fitted)
        }
        ThetaSource::Fitted(r) => Some(r),
    };
    let variance_warning = regression.is_some_and(|r| r.min_paths() < MIN_REGRESSION_PATHS);
    let intensity_factor = 1.0 + density.relative_jump_at_model_jump(model);
    let has_jumps = ch.jump_spec().is_some();

    let mask: Vec<bool> = (0..s.n_paths()).map(|p| decomp_p.mask[p] && z.terminal(p) > 0.0).collect();
    for (p, &m) in mask.iter().enumerate() {
        if m {
            if let Some(i) = z.path(p).iter().position(|v| *v <= 0.0) {
                return Err(MeasureError::InvalidDensity(format!(
                    "Z vanishes at index {i} on path {p} although Z_T > 0"
                )));
            }
        }
    }

    let rows = par::map_indexed(s.n_paths(), |p| {
        let mut rows = PathRows::zeros(n + 1, d);
        let mut theta = vec![0.0; (n + 1) * d];
        let mut mbar = vec![0.0; (n + 1) * d];
        if !mask[p] {
            return Ok((rows, theta, mbar));
        }
        let mut cache = PinvCache::new(tol);
        let s0 = s.value(p, 0, 0);
        let w1 = density.w1_path(model, s, p);
        let (mut col0, mut loading, mut q) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let (mut th, mut c_theta, mut a_q) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let (mut lam_q, mut nu_q) = (vec![0.0; d], vec![0.0; d]);
        for i in 0..n {
            let t = grid.time(i);
            let x = s.state(p, i);
            let zi = z.at(p, i);
            let c = decomp_p.c.get(p, i);
            let pinv = cache.get(d, c)?.pinv.as_slice();
            match regression {
                None => {
                    for (j, v) in col0.iter_mut().enumerate() {
                        *v = c[j * d] / s0;
                    }
                    ch.loading_w1_into(t, x, &mut loading);
                    density.covariation_density_into(t, horizon, &col0, &loading, zi, w1[i], &mut q);
                }
                Some(r) => {
                    for (j, v) in q.iter_mut().enumerate() {
                        let (alpha, beta) = r.coefficients(i, j);
                        *v = alpha + beta * zi;
                    }
                }
            }
            mul_vec_into(pinv, &q, &mut th);
            let (lam, nu, a): (&[f64], &[f64], &[f64]) = if has_jumps && intensity_factor != 1.0 {
                ch.drift_with_intensity_into(t, x, intensity_factor, &mut a_q);
                decompose_into(&a_q, c, pinv, &mut lam_q, &mut nu_q);
                (&lam_q, &nu_q, &a_q)
            } else {
                (decomp_p.lambda.get(p, i), decomp_p.nu.get(p, i), decomp_p.drift.get(p, i))
            };
            mul_vec_into(c, &th, &mut c_theta);
            let db = decomp_p.db[i];
            for j in 0..d {
                rows.lambda[i * d + j] = lam[j] + th[j] / zi;
                rows.nu[i * d + j] = nu[j];
                let abar = a[j] + c_theta[j] / zi;
                rows.a[i * d + j] = abar;
                theta[i * d + j] = th[j];
                mbar[i * d + j] = s.value(p, i + 1, j) - x[j] - abar * db;
            }
            rows.c[i * d * d..(i + 1) * d * d].copy_from_slice(c);
        }
        Ok::<_, MeasureError>((rows, theta, mbar))
    });

    let mut path_rows = Vec::with_capacity(s.n_paths());
    let mut theta = Vec::with_capacity(s.n_paths() * (n + 1) * d);
    let mut mbar = Vec::with_capacity(s.n_paths() * (n + 1) * d);
    for r in rows {
        let (pr, th, mb) = r?;
        path_rows.push(pr);
        theta.extend(th);
        mbar.extend(mb);
    }
    Ok(QDecomposition {
        theta: GridProcess::from_values(grid.clone(), s.n_paths(), d, theta)?,
        decomposition: Decomposition::assemble(grid, d, decomp_p.db.clone(), mask, path_rows)?,
        m_bar_increments: GridProcess::from_values(grid.clone(), s.n_paths(), d, mbar)?,
        variance_warning,
    })
}

/// Time average over the grid of the cross-path mean of `theta / Z_-`
/// (first component) on `Q`-charged paths.
pub fn theta_over_z_time_average(q: &QDecomposition, z: &DensityProcess) -> f64 {
    let dec = &q.decomposition;
    let n = dec.steps();
    let horizon = dec.grid().horizon();
    let mut per_step = Vec::with_capacity(n);
    for i in 0..n {
        let vals: Vec<f64> = (0..dec.n_paths())
            .filter(|&p| dec.mask[p])
            .map(|p| q.theta.get(p, i)[0] / z.at(p, i))
            .collect();
        if !vals.is_empty() {
            per_step.push(pairwise_sum(&vals) / vals.len() as f64 * dec.db[i]);
        }
    }
    pairwise_sum(&per_step) / horizon
}

/// Pathwise check of `K^Q_t <= 2 K_t + 2 sum theta' c theta / Z_-^2 dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheck {
    pub holds: bool,
    pub checked_points: usize,
    pub violations: usize,
    /// Largest `K^Q_t / rhs_t` over points with a positive right-hand side.
    pub max_ratio: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl BoundCheck {
    pub fn merge(&mut self, other: &Self) {
        self.holds &= other.holds;
        self.checked_points += other.checked_points;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

pub const BOUND_ABS_TOL: f64 = 1e-8;
pub const BOUND_REL_TOL: f64 = 0.05;

/// Mean-variance trade-off under `Q` and the Kunita-Watanabe bound relating
/// it to the `P` trade-off and the density.
pub fn mvt_under_q(
    q: &QDecomposition,
    decomp_p: &Decomposition,
    z: &DensityProcess,
    partner: Option<&Decomposition>,
    th: &Thresholds,
) -> Result<(TradeoffReport, BoundCheck), MeasureError> {
    let report = mean_variance_tradeoff(&q.decomposition, partner, th)?;
    let dec = &q.decomposition;
    let n = dec.steps();
    let per_path = par::map_indexed(dec.n_paths(), |p| {
        let mut checked = 0usize;
        let mut violations = 0usize;
        let mut max_ratio: f64 = 0.0;
        if !dec.mask[p] {
            return (checked, violations, max_ratio);
        }
        let (mut kq, mut kp, mut extra) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let db = dec.db[i];
            kq += dec.c_quadratic(p, i, dec.lambda.get(p, i)) * db;
            kp += dec.c_quadratic(p, i, decomp_p.lambda.get(p, i)) * db;
            let zi = z.at(p, i);
            extra += dec.c_quadratic(p, i, q.theta.get(p, i)) / (zi * zi) * db;
            let rhs = 2.0 * kp + 2.0 * extra;
            checked += 1;
            if kq > rhs + BOUND_ABS_TOL + BOUND_REL_TOL * rhs {
                violations += 1;
            }
            if rhs > 0.0 {
                max_ratio = max_ratio.max(kq / rhs);
            }
        }
        (checked, violations, max_ratio)
    });
    let mut bound = BoundCheck {
        holds: true,
        checked_points: 0,
        violations: 0,
        max_ratio: 0.0,
        abs_tol: BOUND_ABS_TOL,
        rel_tol: BOUND_REL_TOL,
    };
    for (c, v, r) in per_path {
        bound.checked_points += c;
        bound.violations += v;
        bound.max_ratio = bound.max_ratio.max(r);
    }
    bound.holds = bound.violations == 0;
    Ok((report, bound))
}

