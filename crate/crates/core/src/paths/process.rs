use super::{AuxKind, PathBundle, PathsError, TimeGrid};
use crate::par;

/// Per-path processes on a grid, `k` components per time.
///
/// Convention: the value at index `i` is the position held over
/// `(t_i, t_{i+1}]`, so it may depend on path information up to `t_i` only.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProcess {
    grid: TimeGrid,
    n_paths: usize,
    width: usize,
    values: Vec<f64>,
}

/// Read access to one path truncated at the current grid index.
///
/// Any attempt to look past the current index is reported as an error, which
/// makes [`GridProcess::predictable`] reject look-ahead integrands.
pub struct PrefixView<'a> {
    bundle: &'a PathBundle,
    path: usize,
    index: usize,
}

impl<'a> PrefixView<'a> {
    /// Current grid index `i`.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Global path index (the path's random stream).
    pub fn global_path(&self) -> u64 {
        self.bundle.first_path() + self.path as u64
    }

    pub fn time(&self, i: usize) -> Result<f64, PathsError> {
        self.guard(i)?;
        Ok(self.bundle.grid().time(i))
    }

    pub fn state(&self, i: usize) -> Result<&'a [f64], PathsError> {
        self.guard(i)?;
        Ok(self.bundle.state(self.path, i))
    }

    pub fn current(&self) -> &'a [f64] {
        self.bundle.state(self.path, self.index)
    }

    /// A per-time aux series value at index `i <= index()`. Per-path aux data
    /// (such as an exact jump time) is not adapted and is not exposed.
    pub fn aux(&self, name: &str, i: usize) -> Result<f64, PathsError> {
        self.guard(i)?;
        let series = self
            .bundle
            .aux(name)
            .ok_or_else(|| PathsError::MissingAux(name.to_owned()))?;
        if series.kind != AuxKind::PerTime {
            return Err(PathsError::NotAdapted(name.to_owned()));
        }
        Ok(series.data[self.path * series.width + i])
    }

    fn guard(&self, i: usize) -> Result<(), PathsError> {
        if i > self.index {
            Err(PathsError::FutureRead {
                requested: i,
                current: self.index,
            })
        } else {
            Ok(())
        }
    }
}

impl GridProcess {
    pub fn from_values(grid: TimeGrid, n_paths: usize, width: usize, values: Vec<f64>) -> Result<Self, PathsError> {
        let expected = n_paths * grid.len() * width;
        if width == 0 || values.len() != expected {
            return Err(PathsError::Shape {
                what: "grid process",
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            n_paths,
            width,
            values,
        })
    }

    /// The same vector `h` at every path and time.
    pub fn constant(grid: &TimeGrid, n_paths: usize, h: &[f64]) -> Self {
        let mut values = Vec::with_capacity(n_paths * grid.len() * h.len());
        for _ in 0..n_paths * grid.len() {
            values.extend_from_slice(h);
        }
        Self {
            grid: grid.clone(),
            n_paths,
            width: h.len(),
            values,
        }
    }

    /// Builds a predictable process by calling `f` once per path and grid
    /// index with a view that only reveals the path up to that index.
    pub fn predictable<F>(bundle: &PathBundle, width: usize, f: F) -> Result<Self, PathsError>
    where
        F: Fn(&PrefixView<'_>, &mut [f64]) -> Result<(), PathsError> + Sync + Send,
    {
        let n_times = bundle.grid().len();
        let rows = par::map_indexed(bundle.n_paths(), |p| {
            let mut row = vec![0.0; n_times * width];
            for i in 0..n_times {
                let view = PrefixView {
                    bundle,
                    path: p,
                    index: i,
                };
                f(&view, &mut row[i * width..(i + 1) * width])?;
            }
            Ok::<_, PathsError>(row)
        });
        let mut values = Vec::with_capacity(bundle.n_paths() * n_times * width);
        for row in rows {
            values.extend(row?);
        }
        Self::from_values(bundle.grid().clone(), bundle.n_paths(), width, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let s = self.grid.len() * self.width;
        &self.values[p * s..(p + 1) * s]
    }

    pub fn get(&self, p: usize, i: usize) -> &[f64] {
        let base = (p * self.grid.len() + i) * self.width;
        &self.values[base..base + self.width]
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, PathsError> {
        if self.values.len() != other.values.len() || self.width != other.width {
            return Err(PathsError::Shape {
                what: "grid process",
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::from_values(self.grid.clone(), self.n_paths, self.width, values)
    }
}

/// Gains `G(H)` of a strategy: a scalar grid process started at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainsProcess(GridProcess);

impl GainsProcess {
    pub(crate) fn from_process(p: GridProcess) -> Self {
        debug_assert_eq!(p.width(), 1);
        Self(p)
    }

    pub fn process(&self) -> &GridProcess {
        &self.0
    }

    pub fn n_paths(&self) -> usize {
        self.0.n_paths()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        self.0.path(p)
    }

    pub fn terminal(&self, p: usize) -> f64 {
        *self.0.path(p).last().unwrap()
    }

    pub fn terminals(&self) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.terminal(p)).collect()
    }
}
