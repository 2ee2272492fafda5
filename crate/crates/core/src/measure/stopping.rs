use serde::{Deserialize, Serialize};

use super::DensityProcess;
use crate::numerics::stats::wilson_interval;

/// How `Z` reaches zero on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Approach {
    Continuous,
    Jump,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathStopping {
    /// First time `Z` is zero; `None` stands for `+inf`.
    pub tau: Option<f64>,
    /// First time `Z < 1/n` for each `n` of the ladder.
    pub tau_n: Vec<Option<f64>>,
    /// Value of `Z` just before `tau`.
    pub z_before_zero: Option<f64>,
    pub approach: Approach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingReport {
    pub ladder: Vec<u32>,
    pub eps_jump: f64,
    pub paths: Vec<PathStopping>,
}

/// Default threshold separating a continuous approach to zero from a jump:
/// five one-step standard deviations of a unit-volatility diffusion.
pub fn default_eps_jump(max_dt: f64) -> f64 {
    5.0 * max_dt.sqrt()
}

pub fn default_ladder() -> Vec<u32> {
    (1..=10).map(|k| 1u32 << k).collect()
}

/// Stopping times `tau` and `tau_n` of `Z` and the classification of how it
/// reaches zero. Grid first-passage times are refined by the exact zero time
/// whenever the model supplies it.
pub fn stopping_times(z: &DensityProcess, ladder: &[u32], eps_jump: f64) -> StoppingReport {
    let times = z.grid().times();
    let paths = (0..z.n_paths())
        .map(|p| {
            let path = z.path(p);
            let grid_zero = path.iter().position(|v| *v == 0.0);
            let tau = z.exact_zero_time(p).or_else(|| grid_zero.map(|k| times[k]));
            let tau_n = ladder
                .iter()
                .map(|&n| {
                    let level = 1.0 / n as f64;
                    let grid_hit = path.iter().position(|v| *v < level).map(|k| times[k]);
                    match (grid_hit, tau) {
                        (Some(h), Some(t)) => Some(h.min(t)),
                        (h, t) => h.or(t),
                    }
                })
                .collect();
            let z_before_zero = tau.and_then(|_| {
                z.left_limit(p).or_else(|| {
                    let k = grid_zero?;
                    path[..k].iter().rev().find(|v| **v > 0.0).copied()
                })
            });
            let approach = match (tau, z_before_zero) {
                (None, _) => Approach::None,
                (Some(_), Some(zb)) if zb > eps_jump => Approach::Jump,
                (Some(_), _) => Approach::Continuous,
            };
            PathStopping {
                tau,
                tau_n,
                z_before_zero,
                approach,
            }
        })
        .collect();
    StoppingReport {
        ladder: ladder.to_vec(),
        eps_jump,
        paths,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProportionEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub successes: usize,
    pub n: usize,
}

impl ProportionEstimate {
    /// Point estimate with a Wilson interval at three standard errors.
    pub fn from_counts(successes: usize, n: usize) -> Self {
        let p = if n > 0 { successes as f64 / n as f64 } else { 0.0 };
        let (lower, upper) = wilson_interval(successes, n, 3.0);
        Self {
            estimate: p,
            stderr: if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { 0.0 },
            lower,
            upper,
            successes,
            n,
        }
    }
}

/// Fraction of paths on which `Z` jumps to zero.
pub fn jump_to_zero_probability(report: &StoppingReport) -> ProportionEstimate {
    let jumps = report.paths.iter().filter(|p| p.approach == Approach::Jump).count();
    ProportionEstimate::from_counts(jumps, report.paths.len())
}

impl StoppingReport {
    /// For each ladder level, the fraction of paths with `tau_n = tau < inf`,
    /// i.e. where `Z` skips the band `(0, 1/n)` entirely.
    pub fn tau_n_equals_tau_fractions(&self) -> Vec<(u32, f64)> {
        let m = self.paths.len().max(1) as f64;
        self.ladder
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let hits = self
                    .paths
                    .iter()
                    .filter(|p| p.tau.is_some() && p.tau_n[k] == p.tau)
                    .count();
                (n, hits as f64 / m)
            })
            .collect()
    }

    /// `tau_n` is non-decreasing in `n` and bounded by a finite `tau`.
    pub fn is_consistent(&self) -> bool {
        self.paths.iter().all(|p| {
            let mono = p.tau_n.windows(2).all(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => a <= b,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => true,
            });
            let bounded = match p.tau {
                Some(t) => p.tau_n.iter().all(|tn| tn.is_some_and(|v| v <= t)),
                None => true,
            };
            mono && bounded
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{GridProcess, TimeGrid};

    #[test]
    fn unit_density_never_stops() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let r = stopping_times(&DensityProcess::unit(&grid, 3), &default_ladder(), 0.05);
        assert!(r.paths.iter().all(|p| p.tau.is_none() && p.approach == Approach::None));
        assert_eq!(jump_to_zero_probability(&r).estimate, 0.0);
        assert!(r.is_consistent());
    }

    #[test]
    fn jump_with_exact_time() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let xi: f64 = 0.4;
        let z: Vec<f64> = grid.times().iter().map(|&t| if xi > t { t.exp() } else { 0.0 }).collect();
        let dp = DensityProcess::new(
            GridProcess::from_values(grid, 1, 1, z).unwrap(),
            vec![Some(xi)],
            vec![Some(xi.exp())],
        )
        .unwrap();
        let r = stopping_times(&dp, &[2, 4], 0.05);
        let p = &r.paths[0];
        assert_eq!(p.tau, Some(0.4));
        assert_eq!(p.tau_n, vec![Some(0.4), Some(0.4)]);
        assert_eq!(p.approach, Approach::Jump);
        assert!((p.z_before_zero.unwrap() - 1.4918246976412703).abs() < 1e-15);
        assert_eq!(r.tau_n_equals_tau_fractions(), vec![(2, 1.0), (4, 1.0)]);
    }

    #[test]
    fn gradual_approach_is_continuous() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let z = vec![1.0, 0.3, 0.01, 0.0, 0.0];
        let dp = DensityProcess::new(GridProcess::from_values(grid, 1, 1, z).unwrap(), vec![None], vec![None]).unwrap();
        let r = stopping_times(&dp, &[2, 4, 8], 0.05);
        let p = &r.paths[0];
        assert_eq!(p.tau, Some(0.75));
        assert_eq!(p.tau_n, vec![Some(0.25), Some(0.5), Some(0.5)]);
        assert_eq!(p.z_before_zero, Some(0.01));
        assert_eq!(p.approach, Approach::Continuous);
        assert!(r.is_consistent());
    }
}
