use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{aux, ModelError, ModelSpec};
use crate::numerics::{derive_stream, RngStream};
use crate::par;
use crate::paths::{AuxKind, PathBundle, PathGenerator, PathsError, TimeGrid};

/// Simulates `n_paths` paths of `spec` on `grid`.
pub fn simulate(spec: &ModelSpec, grid: &TimeGrid, n_paths: usize, root_seed: u64) -> Result<PathBundle, ModelError> {
    simulate_range(spec, grid, 0, n_paths, root_seed)
}

/// Simulates paths `first_path .. first_path + n_paths`. Path `k` is drawn
/// from stream `k` only, so any partition into ranges reproduces the same
/// paths.
pub fn simulate_range(
    spec: &ModelSpec,
    grid: &TimeGrid,
    first_path: u64,
    n_paths: usize,
    root_seed: u64,
) -> Result<PathBundle, ModelError> {
    spec.validate()?;
    let d = spec.dim();
    let n_times = grid.len();
    let rows = par::map_indexed(n_paths, |p| {
        let mut rng = derive_stream(root_seed, first_path + p as u64);
        sample_path(spec, grid, &mut rng)
    });

    let mut values = Vec::with_capacity(n_paths * n_times * d);
    let mut aux_data: Vec<(&'static str, AuxKind, Vec<f64>)> = Vec::new();
    for row in rows {
        values.extend_from_slice(&row.values);
        for (name, kind, data) in row.aux {
            match aux_data.iter_mut().find(|(n, _, _)| *n == name) {
                Some(entry) => entry.2.extend_from_slice(&data),
                None => aux_data.push((name, kind, data)),
            }
        }
    }
    let mut bundle = PathBundle::new(grid.clone(), d, n_paths, root_seed, values)
        .expect("sampler produces consistent shapes")
        .with_first_path(first_path);
    for (name, kind, data) in aux_data {
        bundle.insert_aux(name, kind, data).expect("sampler produces consistent aux shapes");
    }
    Ok(bundle)
}

struct SampledPath {
    values: Vec<f64>,
    aux: Vec<(&'static str, AuxKind, Vec<f64>)>,
}

fn sample_path(spec: &ModelSpec, grid: &TimeGrid, rng: &mut RngStream) -> SampledPath {
    let n = grid.steps();
    let times = grid.times();
    match spec {
        ModelSpec::DriftedBm { mu, sigma, s0 } => {
            let d = mu.len();
            let mut values = Vec::with_capacity((n + 1) * d);
            let mut w1 = Vec::with_capacity(n + 1);
            values.extend_from_slice(s0);
            w1.push(0.0);
            let mut z = vec![0.0; d];
            for i in 0..n {
                let dt = grid.dt(i);
                let sq = dt.sqrt();
                for zj in z.iter_mut() {
                    *zj = rng.sample::<f64, _>(StandardNormal) * sq;
                }
                w1.push(w1[i] + z[0]);
                for r in 0..d {
                    let shock: f64 = (0..d).map(|c| sigma[r * d + c] * z[c]).sum();
                    let prev = values[i * d + r];
                    values.push(prev + mu[r] * dt + shock);
                }
            }
            SampledPath {
                values,
                aux: vec![(aux::W1, AuxKind::PerTime, w1)],
            }
        }
        ModelSpec::StoppedBm { s0 } => {
            let mut values = Vec::with_capacity(n + 1);
            values.push(*s0);
            let mut absorbed_at = -1.0;
            let mut x = *s0;
            for i in 0..n {
                if x > 0.0 {
                    let dt = grid.dt(i);
                    let next = x + dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    // The bridge between two positive endpoints touches zero
                    // with probability exp(-2 x y / dt).
                    let hit = next <= 0.0 || rng.random::<f64>() < (-2.0 * x * next / dt).exp();
                    if hit {
                        x = 0.0;
                        absorbed_at = (i + 1) as f64;
                    } else {
                        x = next;
                    }
                }
                values.push(x);
            }
            SampledPath {
                values,
                aux: vec![(aux::ABSORPTION_INDEX, AuxKind::GridIndex, vec![absorbed_at])],
            }
        }
        ModelSpec::Bes3 { x0 } => {
            let mut y = [*x0, 0.0, 0.0];
            let mut values = Vec::with_capacity(n + 1);
            values.push(*x0);
            for i in 0..n {
                let sq = grid.dt(i).sqrt();
                for yk in y.iter_mut() {
                    *yk += sq * rng.sample::<f64, _>(StandardNormal);
                }
                values.push((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt());
            }
            SampledPath { values, aux: vec![] }
        }
        ModelSpec::ExpDefault { rate } => {
            let xi = rng.sample::<f64, _>(Exp1) / rate;
            let values: Vec<f64> = times
                .iter()
                .map(|&t| if xi > t { (rate * t).exp() } else { 0.0 })
                .collect();
            SampledPath {
                aux: vec![
                    (aux::XI, AuxKind::PerPath, vec![xi]),
                    (aux::Z, AuxKind::PerTime, values.clone()),
                ],
                values,
            }
        }
        ModelSpec::CompensatorModel { rate } => {
            let xi = rng.sample::<f64, _>(Exp1) / rate;
            let b: Vec<f64> = times.iter().map(|&t| rate * t.min(xi)).collect();
            let values = times
                .iter()
                .zip(&b)
                .map(|(&t, &bt)| if t >= xi { bt - 1.0 } else { bt })
                .collect();
            SampledPath {
                values,
                aux: vec![(aux::XI, AuxKind::PerPath, vec![xi]), (aux::B, AuxKind::PerTime, b)],
            }
        }
        ModelSpec::KernelDrift => {
            let mut values = Vec::with_capacity(2 * (n + 1));
            values.extend_from_slice(&[0.0, 0.0]);
            for i in 0..n {
                let w = values[2 * i] + grid.dt(i).sqrt() * rng.sample::<f64, _>(StandardNormal);
                values.push(w);
                values.push(times[i + 1]);
            }
            SampledPath { values, aux: vec![] }
        }
    }
}

impl PathGenerator for ModelSpec {
    fn generate(
        &self,
        grid: &TimeGrid,
        first_path: u64,
        n_paths: usize,
        root_seed: u64,
    ) -> Result<PathBundle, PathsError> {
        simulate_range(self, grid, first_path, n_paths, root_seed)
            .map_err(|e| PathsError::InvalidGrid(e.to_string()))
    }

    /// Every catalog sampler is exact in law at the grid points.
    fn supports_exact_refinement(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::refine_grid;

    #[test]
    fn ranges_reproduce_the_full_simulation() {
        let spec = ModelSpec::StoppedBm { s0: 1.0 };
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let all = simulate(&spec, &grid, 10, 3).unwrap();
        let tail = simulate_range(&spec, &grid, 4, 6, 3).unwrap();
        for p in 0..6 {
            assert_eq!(all.path(p + 4), tail.path(p));
        }
    }

    #[test]
    fn exp_default_is_exactly_scaled_exponential() {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let b = simulate(&ModelSpec::ExpDefault { rate: 1.0 }, &grid, 200, 1).unwrap();
        for p in 0..200 {
            for (i, &t) in grid.times().iter().enumerate() {
                let s = b.value(p, i, 0);
                assert!(s == 0.0 || s == t.exp());
            }
        }
    }

    #[test]
    fn kernel_drift_second_component_is_time() {
        let grid = TimeGrid::uniform(2.0, 16).unwrap();
        let b = simulate(&ModelSpec::KernelDrift, &grid, 5, 1).unwrap();
        for p in 0..5 {
            for (i, &t) in grid.times().iter().enumerate() {
                assert_eq!(b.value(p, i, 1), t);
            }
        }
    }

    #[test]
    fn stopped_paths_freeze_after_absorption() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let b = simulate(&ModelSpec::StoppedBm { s0: 0.3 }, &grid, 200, 9).unwrap();
        let mut absorbed = 0;
        for p in 0..200 {
            let k = b.aux_scalar(aux::ABSORPTION_INDEX, p).unwrap();
            if k >= 0.0 {
                absorbed += 1;
                let k = k as usize;
                assert!(b.value(p, k - 1, 0) > 0.0);
                assert!(b.path(p)[k..].iter().all(|x| *x == 0.0));
            } else {
                assert!(b.path(p).iter().all(|x| *x > 0.0));
            }
        }
        assert!(absorbed > 0);
    }

    #[test]
    fn refinement_restriction_identity() {
        let spec = ModelSpec::drifted_bm_1d(0.2, 1.3);
        let coarse = TimeGrid::uniform(1.0, 32).unwrap();
        let (c, f) = refine_grid(&spec, &coarse, 2, 0, 8, 11).unwrap();
        for p in 0..8 {
            for i in 0..=32 {
                assert_eq!(c.value(p, i, 0), f.value(p, 2 * i, 0));
            }
        }
    }

    #[test]
    fn invalid_spec_is_an_error() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(simulate(&ModelSpec::Bes3 { x0: -1.0 }, &grid, 1, 0).is_err());
    }
}
