use super::MeasureError;
use crate::models::{DensitySpec, ModelSpec};
use crate::par;
use crate::paths::{GridProcess, PathBundle, TimeGrid};

/// A non-negative martingale `Z` with `Z_0 = 1`, sampled on the bundle grid,
/// together with the exact time it reaches zero where the model knows it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProcess {
    z: GridProcess,
    exact_zero_time: Vec<Option<f64>>,
    left_limit: Vec<Option<f64>>,
}

impl DensityProcess {
    /// Validates `Z >= 0`, `Z_0 = 1` and constancy after the first zero.
    pub fn new(
        z: GridProcess,
        exact_zero_time: Vec<Option<f64>>,
        left_limit: Vec<Option<f64>>,
    ) -> Result<Self, MeasureError> {
        if z.width() != 1 || exact_zero_time.len() != z.n_paths() || left_limit.len() != z.n_paths() {
            return Err(MeasureError::InvalidDensity("shape mismatch".into()));
        }
        for p in 0..z.n_paths() {
            let path = z.path(p);
            if path[0] != 1.0 {
                return Err(MeasureError::InvalidDensity(format!("Z_0 = {} on path {p}", path[0])));
            }
            if let Some(i) = path.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(MeasureError::InvalidDensity(format!(
                    "negative or non-finite value at index {i} of path {p}"
                )));
            }
            if let Some(k) = path.iter().position(|v| *v == 0.0) {
                if path[k..].iter().any(|v| *v != 0.0) {
                    return Err(MeasureError::InvalidDensity(format!("path {p} leaves zero after index {k}")));
                }
            }
        }
        Ok(Self {
            z,
            exact_zero_time,
            left_limit,
        })
    }

    pub fn unit(grid: &TimeGrid, n_paths: usize) -> Self {
        Self {
            z: GridProcess::constant(grid, n_paths, &[1.0]),
            exact_zero_time: vec![None; n_paths],
            left_limit: vec![None; n_paths],
        }
    }

    /// Evaluates `spec` along the paths of `bundle`.
    pub fn from_spec(spec: &DensitySpec, model: &ModelSpec, bundle: &PathBundle) -> Result<Self, MeasureError> {
        spec.check_compatible(model)?;
        let rows = par::map_indexed(bundle.n_paths(), |p| spec.z_path(model, bundle, p));
        let mut values = Vec::with_capacity(bundle.n_paths() * bundle.grid().len());
        for r in rows {
            values.extend(r?);
        }
        let z = GridProcess::from_values(bundle.grid().clone(), bundle.n_paths(), 1, values)?;
        let exact = (0..bundle.n_paths())
            .map(|p| spec.exact_zero_time(model, bundle, p))
            .collect();
        let left = (0..bundle.n_paths())
            .map(|p| spec.left_limit_at_zero(model, bundle, p))
            .collect();
        Self::new(z, exact, left)
    }

    pub fn process(&self) -> &GridProcess {
        &self.z
    }

    pub fn n_paths(&self) -> usize {
        self.z.n_paths()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.z.grid()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        self.z.path(p)
    }

    pub fn at(&self, p: usize, i: usize) -> f64 {
        self.z.get(p, i)[0]
    }

    pub fn terminal(&self, p: usize) -> f64 {
        *self.z.path(p).last().unwrap()
    }

    pub fn terminals(&self) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.terminal(p)).collect()
    }

    /// Paths charged by `Q`: those with `Z_T > 0`.
    pub fn q_mask(&self) -> Vec<bool> {
        (0..self.n_paths()).map(|p| self.terminal(p) > 0.0).collect()
    }

    pub fn exact_zero_time(&self, p: usize) -> Option<f64> {
        self.exact_zero_time[p]
    }

    pub fn left_limit(&self, p: usize) -> Option<f64> {
        self.left_limit[p]
    }
}
