//! Dense symmetric matrices, Jacobi eigendecomposition and the PSD
//! pseudoinverse used to split a drift into its range and kernel parts.

use serde::{Deserialize, Serialize};

use super::compensated::{self, DoubleDouble};
use super::NumericsError;

/// Largest dimension accepted by [`pinv_psd`].
pub const MAX_DIM: usize = 64;

/// Relative eigenvalue cutoff used when none is configured.
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// A `d x d` symmetric matrix stored row-major. Symmetry is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, rejecting any asymmetry.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(NumericsError::Shape {
                expected: dim * dim,
                found: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a symmetric matrix from an upper-triangle generator.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `s * s^T` for a row-major `d x d` (not necessarily symmetric) factor.
    pub fn gram(dim: usize, factor: &[f64]) -> Self {
        assert_eq!(factor.len(), dim * dim);
        Self::from_fn(dim, |i, j| {
            compensated::dot(&factor[i * dim..(i + 1) * dim], &factor[j * dim..(j + 1) * dim])
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        mul_vec_into(&self.data, x, &mut out);
        out
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        quadratic_form(&self.data, x)
    }
}

/// `out = M x` for a row-major `d x d` matrix given as a slice, with each
/// row product evaluated in double-double.
pub fn mul_vec_into(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    assert_eq!(m.len(), d * d);
    assert_eq!(out.len(), d);
    for (i, o) in out.iter_mut().enumerate() {
        *o = compensated::dot(&m[i * d..(i + 1) * d], x);
    }
}

/// `x^T M x` for a row-major `d x d` slice (`d <= MAX_DIM`), without
/// allocating.
pub fn quadratic_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    assert!(d <= MAX_DIM);
    let mut buf = [0.0; MAX_DIM];
    mul_vec_into(m, x, &mut buf[..d]);
    compensated::dot(x, &buf[..d])
}

/// Eigenpairs of a symmetric matrix. `vectors[k]` is the unit eigenvector
/// for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi on a working copy; accumulates rotations into `v`
/// (row-major, columns are eigenvectors).
fn jacobi_in_place(a: &mut [f64], v: &mut [f64], n: usize) {
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let floor = f64::EPSILON * f64::EPSILON * scale;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= floor || apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        let new_rp = c * arp - s * arq;
                        let new_rq = s * arp + c * arq;
                        a[r * n + p] = new_rp;
                        a[p * n + r] = new_rp;
                        a[r * n + q] = new_rq;
                        a[q * n + r] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Eigendecomposition by cyclic Jacobi rotations followed by one refinement
/// pass: `V^T M V` is re-formed in double-double arithmetic and diagonalised
/// again, which pins down the small eigenvalues to relative accuracy.
pub fn symmetric_eigen(m: &SymMatrix) -> SymmetricEigen {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(n).data;
    jacobi_in_place(&mut a, &mut v, n);

    // B = V^T M V in double-double, rounded once per entry.
    let mut mv = vec![DoubleDouble::ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let mut acc = DoubleDouble::ZERO;
            for l in 0..n {
                acc = acc.add_prod(m.data[i * n + l], v[l * n + k]);
            }
            mv[i * n + k] = acc;
        }
    }
    let mut b = vec![0.0; n * n];
    for j in 0..n {
        for k in j..n {
            let mut acc = DoubleDouble::ZERO;
            for i in 0..n {
                acc = acc.add(mv[i * n + k].mul_f64(v[i * n + j]));
            }
            let x = acc.to_f64();
            b[j * n + k] = x;
            b[k * n + j] = x;
        }
    }
    let mut w = SymMatrix::identity(n).data;
    jacobi_in_place(&mut b, &mut w, n);

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        values.push(b[k * n + k]);
        let vec_k: Vec<f64> = (0..n)
            .map(|r| {
                (0..n)
                    .fold(DoubleDouble::ZERO, |acc, l| acc.add_prod(v[r * n + l], w[l * n + k]))
                    .to_f64()
            })
            .collect();
        vectors.push(vec_k);
    }
    SymmetricEigen { values, vectors }
}

/// Moore-Penrose pseudoinverse of a PSD matrix together with its rank and the
/// orthogonal projector onto its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoinverseResult {
    pub pinv: SymMatrix,
    pub rank: usize,
    pub range_projector: SymMatrix,
    pub tol_used: f64,
}

fn outer_sum(n: usize, terms: &[(f64, &[f64])]) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| {
        terms
            .iter()
            .fold(DoubleDouble::ZERO, |acc, (w, v)| acc.add(DoubleDouble::from_f64(v[i]).mul_f64(v[j]).mul_f64(*w)))
            .to_f64()
    })
}

/// Pseudoinverse of a symmetric PSD matrix.
///
/// Eigenvalues at or below `tol * lambda_max` are treated as zero. Negative
/// eigenvalues down to `-sqrt(tol) * lambda_max` are rounding noise and are
/// clamped; anything more negative is rejected.
pub fn pinv_psd(c: &SymMatrix, tol: f64) -> Result<PseudoinverseResult, NumericsError> {
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidTolerance(tol));
    }
    if c.dim > MAX_DIM {
        return Err(NumericsError::TooLarge(c.dim));
    }
    if c.data.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let n = c.dim;
    let eig = symmetric_eigen(c);
    let lmax = eig.values.iter().cloned().fold(0.0_f64, f64::max);
    if lmax == 0.0 {
        let min = eig.values.iter().cloned().fold(0.0_f64, f64::min);
        if min < 0.0 {
            return Err(NumericsError::NotPsd { eigenvalue: min, largest: lmax });
        }
        return Ok(PseudoinverseResult {
            pinv: SymMatrix::zeros(n),
            rank: 0,
            range_projector: SymMatrix::zeros(n),
            tol_used: tol,
        });
    }
    let neg_limit = -tol.sqrt() * lmax;
    if let Some(&bad) = eig.values.iter().find(|&&l| l < neg_limit) {
        return Err(NumericsError::NotPsd { eigenvalue: bad, largest: lmax });
    }
    let cutoff = tol * lmax;
    let kept: Vec<(f64, &[f64])> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, v)| (*l, v.as_slice()))
        .collect();
    let inv_terms: Vec<(f64, &[f64])> = kept.iter().map(|(l, v)| (1.0 / l, *v)).collect();
    let proj_terms: Vec<(f64, &[f64])> = kept.iter().map(|(_, v)| (1.0, *v)).collect();
    Ok(PseudoinverseResult {
        pinv: outer_sum(n, &inv_terms),
        rank: kept.len(),
        range_projector: outer_sum(n, &proj_terms),
        tol_used: tol,
    })
}

/// Split of a drift `a = c * lambda + nu` with `nu` in the kernel of `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDecomposition {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
}

impl DriftDecomposition {
    pub fn zero(dim: usize) -> Self {
        Self {
            lambda: vec![0.0; dim],
            nu: vec![0.0; dim],
        }
    }
}

/// `lambda = c^+ a`, `nu = a - c lambda`.
pub fn decompose_drift(a: &[f64], c: &SymMatrix, tol: f64) -> Result<DriftDecomposition, NumericsError> {
    if a.len() != c.dim {
        return Err(NumericsError::Shape {
            expected: c.dim,
            found: a.len(),
        });
    }
    let pinv = pinv_psd(c, tol)?;
    Ok(decompose_with(a, c, &pinv))
}

/// Same as [`decompose_drift`] with a precomputed pseudoinverse.
pub fn decompose_with(a: &[f64], c: &SymMatrix, pinv: &PseudoinverseResult) -> DriftDecomposition {
    let d = a.len();
    let mut lambda = vec![0.0; d];
    let mut nu = vec![0.0; d];
    decompose_into(a, c.as_slice(), pinv.pinv.as_slice(), &mut lambda, &mut nu);
    DriftDecomposition { lambda, nu }
}

/// Slice form of [`decompose_with`]: `lambda = c^+ a`, `nu = a - c lambda`.
pub fn decompose_into(a: &[f64], c: &[f64], pinv: &[f64], lambda: &mut [f64], nu: &mut [f64]) {
    let d = a.len();
    assert!(d <= MAX_DIM);
    mul_vec_into(pinv, a, lambda);
    let mut c_lambda = [0.0; MAX_DIM];
    mul_vec_into(c, lambda, &mut c_lambda[..d]);
    for j in 0..d {
        nu[j] = a[j] - c_lambda[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
        let n = a.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| a.get(i, k) * b.get(k, j)).sum();
            }
        }
        out
    }

    #[test]
    fn identity_is_its_own_pseudoinverse() {
        let r = pinv_psd(&SymMatrix::identity(2), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(r.rank, 2);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r.pinv.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_with_zero_entry() {
        let r = pinv_psd(&SymMatrix::diag(&[4.0, 0.0]), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(r.rank, 1);
        assert!((r.pinv.get(0, 0) - 0.25).abs() < 1e-15);
        assert_eq!(r.pinv.get(1, 1), 0.0);
        assert_eq!(r.pinv.get(0, 1), 0.0);
        assert!((r.range_projector.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let r = pinv_psd(&SymMatrix::zeros(3), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(r.rank, 0);
        assert!(r.pinv.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let err = SymMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).unwrap_err();
        assert!(matches!(err, NumericsError::NotSymmetric { row: 0, col: 1 }));
    }

    #[test]
    fn indefinite_input_is_rejected() {
        let c = SymMatrix::diag(&[1.0, -0.5]);
        assert!(matches!(pinv_psd(&c, DEFAULT_PINV_TOL), Err(NumericsError::NotPsd { .. })));
    }

    #[test]
    fn small_negative_rounding_is_clamped() {
        let c = SymMatrix::diag(&[1.0, -1e-14]);
        let r = pinv_psd(&c, DEFAULT_PINV_TOL).unwrap();
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn bad_tolerance_and_oversize_are_errors() {
        assert!(matches!(
            pinv_psd(&SymMatrix::identity(2), 0.0),
            Err(NumericsError::InvalidTolerance(_))
        ));
        assert!(matches!(
            pinv_psd(&SymMatrix::identity(65), 1e-12),
            Err(NumericsError::TooLarge(65))
        ));
    }

    #[test]
    fn jacobi_reconstructs_a_dense_matrix() {
        let m = SymMatrix::new(3, vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0]).unwrap();
        let e = symmetric_eigen(&m);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                assert!((r - m.get(i, j)).abs() < 1e-13);
            }
        }
        let p = pinv_psd(&m, DEFAULT_PINV_TOL).unwrap();
        let prod = matmul(&m, &p.pinv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 3 + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn drift_in_kernel() {
        let d = decompose_drift(&[0.0, 1.0], &SymMatrix::diag(&[1.0, 0.0]), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(d.lambda, vec![0.0, 0.0]);
        assert_eq!(d.nu, vec![0.0, 1.0]);
    }

    #[test]
    fn drift_with_invertible_covariance() {
        let d = decompose_drift(&[1.0, 2.0], &SymMatrix::identity(2), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(d.lambda, vec![1.0, 2.0]);
        assert_eq!(d.nu, vec![0.0, 0.0]);
    }

    #[test]
    fn drift_shape_mismatch() {
        assert!(decompose_drift(&[1.0], &SymMatrix::identity(2), DEFAULT_PINV_TOL).is_err());
    }
}
