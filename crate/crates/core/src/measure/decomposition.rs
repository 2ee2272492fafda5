use super::MeasureError;
use crate::models::Characteristics;
use crate::numerics::linalg::{decompose_into, pinv_psd, quadratic_form, PseudoinverseResult};
use crate::numerics::SymMatrix;
use crate::par;
use crate::paths::{GridProcess, PathBundle, TimeGrid};

/// Per-path, per-step drift split `a = c lambda + nu` evaluated at the left
/// end of every grid interval, together with the clock increments `dB`.
///
/// Paths outside `mask` are never read; their entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub lambda: GridProcess,
    pub nu: GridProcess,
    pub c: GridProcess,
    pub drift: GridProcess,
    pub db: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Reuses the last pseudoinverse while the covariance matrix repeats, which
/// is the common case along a path of a constant-coefficient model.
pub(crate) struct PinvCache {
    tol: f64,
    last_c: Vec<f64>,
    last: Option<PseudoinverseResult>,
}

impl PinvCache {
    pub(crate) fn new(tol: f64) -> Self {
        Self {
            tol,
            last_c: Vec::new(),
            last: None,
        }
    }

    pub(crate) fn get(&mut self, d: usize, c: &[f64]) -> Result<&PseudoinverseResult, MeasureError> {
        if self.last.is_none() || self.last_c != c {
            let m = SymMatrix::new(d, c.to_vec())?;
            self.last = Some(pinv_psd(&m, self.tol)?);
            self.last_c.clear();
            self.last_c.extend_from_slice(c);
        }
        Ok(self.last.as_ref().expect("filled above"))
    }
}

pub(crate) struct PathRows {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
}

impl PathRows {
    pub(crate) fn zeros(n_times: usize, d: usize) -> Self {
        Self {
            lambda: vec![0.0; n_times * d],
            nu: vec![0.0; n_times * d],
            c: vec![0.0; n_times * d * d],
            a: vec![0.0; n_times * d],
        }
    }
}

impl Decomposition {
    pub(crate) fn assemble(
        grid: &TimeGrid,
        d: usize,
        db: Vec<f64>,
        mask: Vec<bool>,
        rows: Vec<PathRows>,
    ) -> Result<Self, MeasureError> {
        let m = rows.len();
        let n_times = grid.len();
        let mut lambda = Vec::with_capacity(m * n_times * d);
        let mut nu = Vec::with_capacity(m * n_times * d);
        let mut c = Vec::with_capacity(m * n_times * d * d);
        let mut a = Vec::with_capacity(m * n_times * d);
        for r in rows {
            lambda.extend(r.lambda);
            nu.extend(r.nu);
            c.extend(r.c);
            a.extend(r.a);
        }
        Ok(Self {
            lambda: GridProcess::from_values(grid.clone(), m, d, lambda)?,
            nu: GridProcess::from_values(grid.clone(), m, d, nu)?,
            c: GridProcess::from_values(grid.clone(), m, d * d, c)?,
            drift: GridProcess::from_values(grid.clone(), m, d, a)?,
            db,
            mask,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.lambda.grid()
    }

    pub fn dim(&self) -> usize {
        self.lambda.width()
    }

    pub fn n_paths(&self) -> usize {
        self.lambda.n_paths()
    }

    pub fn steps(&self) -> usize {
        self.db.len()
    }

    /// `x' c x` with `c` at path `p`, step `i`.
    pub fn c_quadratic(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        quadratic_form(self.c.get(p, i), x)
    }

    pub fn c_at(&self, p: usize, i: usize) -> SymMatrix {
        SymMatrix::new(self.dim(), self.c.get(p, i).to_vec()).expect("stored covariances are symmetric")
    }
}

/// Fills one path's rows; `step(i, a, c)` writes the drift and row-major
/// covariance at step `i`.
pub(crate) fn decompose_path(
    n: usize,
    d: usize,
    cache: &mut PinvCache,
    mut step: impl FnMut(usize, &mut [f64], &mut [f64]) -> Result<(), MeasureError>,
) -> Result<PathRows, MeasureError> {
    let mut rows = PathRows::zeros(n + 1, d);
    for i in 0..n {
        let (v, m) = (i * d..(i + 1) * d, i * d * d..(i + 1) * d * d);
        step(i, &mut rows.a[v.clone()], &mut rows.c[m.clone()])?;
        let pinv = cache.get(d, &rows.c[m.clone()])?;
        decompose_into(
            &rows.a[v.clone()],
            &rows.c[m],
            pinv.pinv.as_slice(),
            &mut rows.lambda[v.clone()],
            &mut rows.nu[v],
        );
    }
    Ok(rows)
}

/// Decomposes the model drift along every path of `bundle`.
pub fn decompose_paths(
    ch: &Characteristics,
    bundle: &PathBundle,
    tol: f64,
    mask: Option<&[bool]>,
) -> Result<Decomposition, MeasureError> {
    let grid = bundle.grid();
    let n = grid.steps();
    let d = bundle.dim();
    if d != ch.dim() {
        return Err(MeasureError::Shape("model and bundle dimensions differ".into()));
    }
    let mask: Vec<bool> = mask.map_or_else(|| vec![true; bundle.n_paths()], <[bool]>::to_vec);
    let rows = par::map_indexed(bundle.n_paths(), |p| {
        if !mask[p] {
            return Ok(PathRows::zeros(n + 1, d));
        }
        let mut cache = PinvCache::new(tol);
        decompose_path(n, d, &mut cache, |i, a, c| {
            let t = grid.time(i);
            let x = bundle.state(p, i);
            ch.drift_into(t, x, a);
            ch.diffusion_into(t, x, c);
            Ok(())
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let db = (0..n).map(|i| ch.b_increment(grid.time(i), grid.time(i + 1))).collect();
    Decomposition::assemble(grid, d, db, mask, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{characteristics, simulate, ModelSpec};

    #[test]
    fn kernel_drift_decomposition() {
        let model = ModelSpec::KernelDrift;
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let b = simulate(&model, &grid, 3, 1).unwrap();
        let dec = decompose_paths(&characteristics(&model), &b, 1e-12, None).unwrap();
        for p in 0..3 {
            for i in 0..8 {
                assert_eq!(dec.lambda.get(p, i), &[0.0, 0.0]);
                assert_eq!(dec.nu.get(p, i), &[0.0, 1.0]);
            }
        }
        assert_eq!(dec.db.len(), 8);
    }

    #[test]
    fn masked_paths_are_zero() {
        let model = ModelSpec::drifted_bm_1d(0.5, 1.0);
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let b = simulate(&model, &grid, 2, 1).unwrap();
        let dec = decompose_paths(&characteristics(&model), &b, 1e-12, Some(&[true, false])).unwrap();
        assert_eq!(dec.lambda.get(0, 0), &[0.5]);
        assert_eq!(dec.lambda.get(1, 0), &[0.0]);
    }
}
