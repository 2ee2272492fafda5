use arbkit::numerics::{decompose_drift, pinv_psd, SymMatrix};
use proptest::prelude::*;

fn mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..n * n)
        .map(|k| (0..n).map(|m| a[(k / n) * n + m] * b[m * n + k % n]).sum())
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// A positive semi-definite `c = f f'` whose factor has `zero_cols` zero
/// columns, so the rank is at most `dim - zero_cols`.
fn psd() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|dim| {
        (Just(dim), 0..dim, prop::collection::vec(-2.0f64..2.0, dim * dim))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn penrose_identities_hold((dim, zero_cols, mut factor) in psd()) {
        for i in 0..dim {
            for j in 0..zero_cols {
                factor[i * dim + j] = 0.0;
            }
        }
        let c = SymMatrix::gram(dim, &factor);
        let res = pinv_psd(&c, 1e-12).unwrap();
        prop_assert!(res.rank <= dim - zero_cols);
        let (cs, ps) = (c.as_slice(), res.pinv.as_slice());
        let scale = max_abs(cs).max(1e-300);
        let pscale = max_abs(ps).max(1e-300);
        let cp = mul(dim, cs, ps);
        prop_assert!(max_abs_diff(&mul(dim, &cp, cs), cs) <= 1e-9 * scale);
        prop_assert!(max_abs_diff(&mul(dim, &mul(dim, ps, cs), ps), ps) <= 1e-9 * pscale);
        // c c^+ is the orthogonal projector onto the range.
        prop_assert!(max_abs_diff(&cp, res.range_projector.as_slice()) <= 1e-9);
    }

    #[test]
    fn drift_splits_into_range_and_kernel(
        (dim, zero_cols, mut factor) in psd(),
        a in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        for i in 0..dim {
            for j in 0..zero_cols {
                factor[i * dim + j] = 0.0;
            }
        }
        let c = SymMatrix::gram(dim, &factor);
        let a = &a[..dim];
        let d = decompose_drift(a, &c, 1e-12).unwrap();
        let c_lambda = c.mul_vec(&d.lambda);
        let c_nu = c.mul_vec(&d.nu);
        let scale = max_abs(c.as_slice()).max(1.0) * max_abs(a).max(1.0);
        for i in 0..dim {
            prop_assert!((a[i] - c_lambda[i] - d.nu[i]).abs() <= 1e-9 * scale);
            prop_assert!(c_nu[i].abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn pseudoinverse_scales_inversely(
        (dim, _, factor) in psd(),
        alpha in 0.01f64..100.0,
    ) {
        let c = SymMatrix::gram(dim, &factor);
        let scaled = SymMatrix::from_fn(dim, |i, j| alpha * c.get(i, j));
        let p = pinv_psd(&c, 1e-12).unwrap();
        let q = pinv_psd(&scaled, 1e-12).unwrap();
        prop_assert_eq!(p.rank, q.rank);
        let expect: Vec<f64> = p.pinv.as_slice().iter().map(|x| x / alpha).collect();
        prop_assert!(max_abs_diff(q.pinv.as_slice(), &expect) <= 1e-7 * max_abs(&expect).max(1e-12));
    }
}

#[test]
fn zero_matrix_has_zero_pseudoinverse_and_all_drift_in_the_kernel() {
    let c = SymMatrix::zeros(3);
    let d = decompose_drift(&[1.0, -2.0, 0.5], &c, 1e-12).unwrap();
    assert_eq!(d.lambda, vec![0.0; 3]);
    assert_eq!(d.nu, vec![1.0, -2.0, 0.5]);
}

#[test]
fn indefinite_matrices_are_rejected() {
    let c = SymMatrix::diag(&[1.0, -1.0]);
    assert!(pinv_psd(&c, 1e-12).is_err());
}
