use serde::{Deserialize, Serialize};

use super::{GainsProcess, GridProcess, PathBundle, PathsError};
use crate::numerics::compensated::NeumaierSum;
use crate::par;

/// Left-point sums `G_{t_j} = sum_{i<j} H_{t_i} . (S_{t_{i+1}} - S_{t_i})`.
pub fn ito_integral(h: &GridProcess, s: &PathBundle) -> Result<GainsProcess, PathsError> {
    ito_integral_masked(h, s, None)
}

/// As [`ito_integral`], but paths with `mask[p] == false` are never read and
/// carry `G = 0`.
pub fn ito_integral_masked(h: &GridProcess, s: &PathBundle, mask: Option<&[bool]>) -> Result<GainsProcess, PathsError> {
    if let Some(m) = mask {
        if m.len() != s.n_paths() {
            return Err(PathsError::Shape {
                what: "mask",
                expected: s.n_paths(),
                found: m.len(),
            });
        }
    }
    let active = |p: usize| mask.map_or(true, |m| m[p]);
    if h.width() != s.dim() || h.n_paths() != s.n_paths() || h.grid().len() != s.grid().len() {
        return Err(PathsError::Shape {
            what: "integrand",
            expected: s.n_paths() * s.grid().len() * s.dim(),
            found: h.values().len(),
        });
    }
    if (0..h.n_paths()).any(|p| active(p) && h.path(p).iter().any(|x| !x.is_finite())) {
        return Err(PathsError::NonFinite("integrand"));
    }
    let n = s.grid().steps();
    let d = s.dim();
    let rows = par::map_indexed(s.n_paths(), |p| {
        if !active(p) {
            return vec![0.0; n + 1];
        }
        let mut g = Vec::with_capacity(n + 1);
        let mut acc = NeumaierSum::new();
        g.push(0.0);
        for i in 0..n {
            let hi = h.get(p, i);
            let (a, b) = (s.state(p, i), s.state(p, i + 1));
            for j in 0..d {
                // Skipping exact zeros keeps frozen paths from picking up 0 * inf.
                if hi[j] != 0.0 {
                    acc.add(hi[j] * (b[j] - a[j]));
                }
            }
            g.push(acc.value());
        }
        g
    });
    let values = rows.into_iter().flatten().collect();
    Ok(GainsProcess::from_process(GridProcess::from_values(
        s.grid().clone(),
        s.n_paths(),
        1,
        values,
    )?))
}

/// Cumulative realized covariation `sum (dS^i)(dS^j)`, stored as a row-major
/// `d x d` block per grid time.
pub fn realized_covariation(s: &PathBundle) -> GridProcess {
    let n = s.grid().steps();
    let d = s.dim();
    let rows = par::map_indexed(s.n_paths(), |p| {
        let mut out = vec![0.0; (n + 1) * d * d];
        for i in 0..n {
            let (a, b) = (s.state(p, i), s.state(p, i + 1));
            let (prev, next) = out.split_at_mut((i + 1) * d * d);
            let prev = &prev[i * d * d..];
            let next = &mut next[..d * d];
            for r in 0..d {
                for c in 0..d {
                    next[r * d + c] = prev[r * d + c] + (b[r] - a[r]) * (b[c] - a[c]);
                }
            }
        }
        out
    });
    GridProcess::from_values(s.grid().clone(), s.n_paths(), d * d, rows.into_iter().flatten().collect())
        .expect("shape is consistent by construction")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub per_path: Vec<bool>,
    pub admissible: bool,
    /// Smallest gains value over checked paths and times.
    pub min_gain: f64,
    pub checked_paths: usize,
}

/// A strategy is `a`-admissible on a path when its gains never fall below
/// `-a - tol` on the grid. Paths where `mask` is false are skipped (reported
/// as admissible) and never read.
pub fn check_admissible(g: &GainsProcess, a: f64, tol: f64, mask: Option<&[bool]>) -> AdmissibilityReport {
    let mut per_path = Vec::with_capacity(g.n_paths());
    let mut min_gain = f64::INFINITY;
    let mut checked = 0;
    for p in 0..g.n_paths() {
        if mask.is_some_and(|m| !m[p]) {
            per_path.push(true);
            continue;
        }
        checked += 1;
        let m = g.path(p).iter().cloned().fold(f64::INFINITY, f64::min);
        min_gain = min_gain.min(m);
        per_path.push(m >= -a - tol);
    }
    AdmissibilityReport {
        admissible: per_path.iter().all(|x| *x),
        per_path,
        min_gain,
        checked_paths: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::TimeGrid;

    fn deterministic(n: usize, f: impl Fn(f64) -> f64) -> PathBundle {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let values = grid.times().iter().map(|&t| f(t)).collect();
        PathBundle::new(grid, 1, 1, 0, values).unwrap()
    }

    #[test]
    fn zero_integrand_gives_zero_gains() {
        let s = deterministic(10, |t| t * t);
        let h = GridProcess::constant(s.grid(), 1, &[0.0]);
        assert!(ito_integral(&h, &s).unwrap().path(0).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn unit_integrand_telescopes() {
        let s = deterministic(64, |t| (3.0 * t).sin());
        let h = GridProcess::constant(s.grid(), 1, &[1.0]);
        let g = ito_integral(&h, &s).unwrap();
        for (i, gi) in g.path(0).iter().enumerate() {
            assert!((gi - (s.value(0, i, 0) - s.value(0, 0, 0))).abs() < 1e-15);
        }
    }

    #[test]
    fn left_point_riemann_sum_of_t_dt2() {
        // int_0^1 t d(t^2) = 2/3, left-point error is -1/(2N) + O(1/N^2)
        let mut errs = vec![];
        for n in [100, 200, 400] {
            let s = deterministic(n, |t| t * t);
            let h = GridProcess::predictable(&s, 1, |v, out| {
                out[0] = v.time(v.index())?;
                Ok(())
            })
            .unwrap();
            let g = ito_integral(&h, &s).unwrap().terminal(0);
            errs.push((g - 2.0 / 3.0).abs());
        }
        assert!((errs[0] / errs[1] - 2.0).abs() < 0.05);
        assert!((errs[1] / errs[2] - 2.0).abs() < 0.05);
    }

    #[test]
    fn future_read_is_rejected() {
        let s = deterministic(4, |t| t);
        let err = GridProcess::predictable(&s, 1, |v, out| {
            out[0] = v.state(v.index() + 1)?[0];
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, PathsError::FutureRead { .. }));
    }

    #[test]
    fn non_finite_integrand_rejected() {
        let s = deterministic(4, |t| t);
        let h = GridProcess::constant(s.grid(), 1, &[f64::NAN]);
        assert!(matches!(ito_integral(&h, &s), Err(PathsError::NonFinite(_))));
    }

    #[test]
    fn linear_path_covariation_vanishes_like_one_over_n() {
        for n in [10, 100] {
            let s = deterministic(n, |t| 2.0 * t);
            let qv = realized_covariation(&s);
            let last = qv.get(0, n)[0];
            assert!((last - 4.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn admissibility() {
        let s = deterministic(4, |t| -t);
        let h = GridProcess::constant(s.grid(), 1, &[0.0]);
        let g0 = ito_integral(&h, &s).unwrap();
        assert!(check_admissible(&g0, 0.0, 0.0, None).admissible);
        let h1 = GridProcess::constant(s.grid(), 1, &[1.0]);
        let g1 = ito_integral(&h1, &s).unwrap();
        assert!(!check_admissible(&g1, 0.5, 0.0, None).admissible);
        let masked = check_admissible(&g1, 0.5, 0.0, Some(&[false]));
        assert!(masked.admissible);
        assert_eq!(masked.checked_paths, 0);
    }
}
