use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PathsError, TimeGrid};

/// Name of the per-path aux series holding the first grid index at which a
/// stopped model is absorbed (`-1` when it never is).
pub const AUX_ABSORPTION_INDEX: &str = "absorption_index";

/// How an aux series is laid out and how it behaves under grid restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxKind {
    /// One value per grid time (`N + 1` per path).
    PerTime,
    /// One value per path (e.g. an exact jump time).
    PerPath,
    /// One grid index per path; rescaled when the grid is coarsened.
    GridIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxSeries {
    pub kind: AuxKind,
    pub width: usize,
    pub data: Vec<f64>,
}

/// Sample paths of a `d`-dimensional process on a shared grid, stored
/// row-major as path × time × component.
///
/// A bundle may hold a contiguous slice of a larger simulation:
/// `first_path` is the global index of its first path, which is also the
/// random stream that path was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    first_path: u64,
    root_seed: u64,
    values: Vec<f64>,
    aux: BTreeMap<String, AuxSeries>,
}

impl PathBundle {
    pub fn new(
        grid: TimeGrid,
        dim: usize,
        n_paths: usize,
        root_seed: u64,
        values: Vec<f64>,
    ) -> Result<Self, PathsError> {
        let expected = n_paths * grid.len() * dim;
        if dim == 0 || values.len() != expected {
            return Err(PathsError::Shape {
                what: "path values",
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            dim,
            n_paths,
            first_path: 0,
            root_seed,
            values,
            aux: BTreeMap::new(),
        })
    }

    pub fn with_first_path(mut self, first_path: u64) -> Self {
        self.first_path = first_path;
        self
    }

    pub fn insert_aux(&mut self, name: &str, kind: AuxKind, data: Vec<f64>) -> Result<(), PathsError> {
        let width = match kind {
            AuxKind::PerTime => self.grid.len(),
            AuxKind::PerPath | AuxKind::GridIndex => 1,
        };
        if data.len() != width * self.n_paths {
            return Err(PathsError::Shape {
                what: "aux series",
                expected: width * self.n_paths,
                found: data.len(),
            });
        }
        self.aux.insert(name.to_owned(), AuxSeries { kind, width, data });
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn first_path(&self) -> u64 {
        self.first_path
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn path_stride(&self) -> usize {
        self.grid.len() * self.dim
    }

    /// All values of path `p`, time-major.
    pub fn path(&self, p: usize) -> &[f64] {
        let s = self.path_stride();
        &self.values[p * s..(p + 1) * s]
    }

    /// State vector of path `p` at grid index `i`.
    pub fn state(&self, p: usize, i: usize) -> &[f64] {
        let base = p * self.path_stride() + i * self.dim;
        &self.values[base..base + self.dim]
    }

    pub fn value(&self, p: usize, i: usize, j: usize) -> f64 {
        self.values[p * self.path_stride() + i * self.dim + j]
    }

    pub fn aux_names(&self) -> impl Iterator<Item = &str> {
        self.aux.keys().map(String::as_str)
    }

    pub fn aux(&self, name: &str) -> Option<&AuxSeries> {
        self.aux.get(name)
    }

    pub fn has_aux(&self, name: &str) -> bool {
        self.aux.contains_key(name)
    }

    /// The aux series `name` for path `p` (length 1 for per-path series).
    pub fn aux_path(&self, name: &str, p: usize) -> Result<&[f64], PathsError> {
        let a = self
            .aux
            .get(name)
            .ok_or_else(|| PathsError::MissingAux(name.to_owned()))?;
        Ok(&a.data[p * a.width..(p + 1) * a.width])
    }

    pub fn aux_scalar(&self, name: &str, p: usize) -> Result<f64, PathsError> {
        Ok(self.aux_path(name, p)?[0])
    }

    /// Terminal value of component `j` on every path.
    pub fn terminal(&self, j: usize) -> Vec<f64> {
        let n = self.grid.steps();
        (0..self.n_paths).map(|p| self.value(p, n, j)).collect()
    }

    /// The same paths observed on every `factor`-th grid point.
    pub fn restrict(&self, factor: usize) -> Result<Self, PathsError> {
        let grid = self.grid.coarsen(factor)?;
        let d = self.dim;
        let mut values = Vec::with_capacity(self.n_paths * grid.len() * d);
        for p in 0..self.n_paths {
            for i in (0..self.grid.len()).step_by(factor) {
                values.extend_from_slice(self.state(p, i));
            }
        }
        let mut aux = BTreeMap::new();
        for (name, series) in &self.aux {
            let data = match series.kind {
                AuxKind::PerTime => {
                    let mut out = Vec::with_capacity(self.n_paths * grid.len());
                    for p in 0..self.n_paths {
                        let row = &series.data[p * series.width..(p + 1) * series.width];
                        out.extend(row.iter().step_by(factor));
                    }
                    out
                }
                AuxKind::PerPath => series.data.clone(),
                AuxKind::GridIndex => series
                    .data
                    .iter()
                    .map(|&k| if k < 0.0 { k } else { (k / factor as f64).ceil() })
                    .collect(),
            };
            let width = if series.kind == AuxKind::PerTime { grid.len() } else { 1 };
            aux.insert(name.clone(), AuxSeries { kind: series.kind, width, data });
        }
        Ok(Self {
            grid,
            dim: d,
            n_paths: self.n_paths,
            first_path: self.first_path,
            root_seed: self.root_seed,
            values,
            aux,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PathBundle {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let values: Vec<f64> = (0..10).map(|x| x as f64).collect();
        let mut b = PathBundle::new(grid, 1, 2, 5, values).unwrap();
        b.insert_aux(AUX_ABSORPTION_INDEX, AuxKind::GridIndex, vec![3.0, -1.0]).unwrap();
        b.insert_aux("xi", AuxKind::PerPath, vec![0.4, 2.0]).unwrap();
        b
    }

    #[test]
    fn indexing_is_path_time_dim() {
        let b = sample();
        assert_eq!(b.value(1, 2, 0), 7.0);
        assert_eq!(b.state(0, 4), &[4.0]);
        assert_eq!(b.terminal(0), vec![4.0, 9.0]);
    }

    #[test]
    fn restriction_keeps_coarse_points() {
        let b = sample();
        let r = b.restrict(2).unwrap();
        assert_eq!(r.values(), &[0.0, 2.0, 4.0, 5.0, 7.0, 9.0]);
        assert_eq!(r.aux_scalar(AUX_ABSORPTION_INDEX, 0).unwrap(), 2.0);
        assert_eq!(r.aux_scalar(AUX_ABSORPTION_INDEX, 1).unwrap(), -1.0);
        assert_eq!(r.aux_scalar("xi", 0).unwrap(), 0.4);
    }

    #[test]
    fn shape_errors() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(PathBundle::new(grid, 1, 2, 0, vec![0.0; 9]).is_err());
        let mut b = sample();
        assert!(b.insert_aux("Z", AuxKind::PerTime, vec![1.0; 3]).is_err());
        assert!(matches!(b.aux_path("nope", 0), Err(PathsError::MissingAux(_))));
    }
}
