use serde::{Deserialize, Serialize};

use super::PathsError;

/// Strictly increasing observation times `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self, PathsError> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(PathsError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(PathsError::InvalidGrid("at least one step is required".into()));
        }
        let mut times: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        times[steps] = horizon;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self, PathsError> {
        if times.len() < 2 {
            return Err(PathsError::InvalidGrid("a grid needs at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(PathsError::InvalidGrid(format!("grid must start at 0, got {}", times[0])));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(PathsError::InvalidGrid(format!(
                    "times must be strictly increasing (index {})",
                    i + 1
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Number of intervals N.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.steps()).map(|i| self.dt(i)).fold(0.0, f64::max)
    }

    /// Inserts `factor - 1` equally spaced points inside every interval.
    pub fn refine(&self, factor: usize) -> Result<Self, PathsError> {
        if factor == 0 {
            return Err(PathsError::InvalidGrid("refinement factor must be positive".into()));
        }
        let mut times = Vec::with_capacity(self.steps() * factor + 1);
        for i in 0..self.steps() {
            let (a, b) = (self.times[i], self.times[i + 1]);
            for k in 0..factor {
                times.push(a + (b - a) * k as f64 / factor as f64);
            }
        }
        times.push(self.horizon());
        Self::from_times(times)
    }

    /// Keeps every `factor`-th point; the step count must be divisible.
    pub fn coarsen(&self, factor: usize) -> Result<Self, PathsError> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(PathsError::InvalidGrid(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps()
            )));
        }
        Self::from_times(self.times.iter().step_by(factor).cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_endpoints() {
        let g = TimeGrid::uniform(2.0, 8).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.horizon(), 2.0);
        assert_eq!(g.steps(), 8);
        assert!((g.dt(3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::uniform(-1.0, 4).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_times(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn refine_then_coarsen_round_trips() {
        let g = TimeGrid::from_times(vec![0.0, 0.3, 1.0]).unwrap();
        let f = g.refine(4).unwrap();
        assert_eq!(f.steps(), 8);
        assert_eq!(f.coarsen(4).unwrap(), g);
        assert!(f.coarsen(3).is_err());
    }
}
