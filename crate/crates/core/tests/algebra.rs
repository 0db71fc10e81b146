use nalgebra::DMatrix;
use proptest::prelude::*;
use rstab_core::curvalg::*;

fn symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            a[(i, j)] = entries[k];
            a[(j, i)] = entries[k];
            k += 1;
        }
    }
    a
}

fn sym_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=6).prop_flat_map(|n| {
        prop::collection::vec(-3.0..3.0f64, n * (n + 1) / 2).prop_map(move |e| symmetric(n, &e))
    })
}

/// `S_r` as a sum over `r`-subsets.
fn subset_sum(values: &[f64], r: usize) -> f64 {
    let n = values.len();
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == r)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i]).product::<f64>())
        .sum()
}

/// `det(tI - A) = sum_k (-1)^k S_k t^{n-k}`.
fn char_poly_residual(a: &DMatrix<f64>, s: &[f64], t: f64) -> f64 {
    let n = a.nrows();
    let det = (DMatrix::identity(n, n) * t - a).determinant();
    let series: f64 = (0..=n)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * s[k] * t.powi((n - k) as i32))
        .sum();
    (det - series).abs() / (1.0 + det.abs())
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn recurrence_matches_kronecker_expansion(a in sym_matrix()) {
        let n = a.nrows();
        let sample = ShapeSample::new(a).unwrap();
        let seq = newton_seq(&sample);
        for r in 0..=n {
            let oracle = newton_reilly(&sample, r).unwrap();
            prop_assert!(rel(seq.get(r), &oracle) < 1e-9, "r = {r}");
        }
        let scale = 1.0 + sample.matrix().norm().powi(n as i32);
        prop_assert!(seq.get(n).amax() < 1e-9 * scale);
    }

    #[test]
    fn trace_identities_hold(a in sym_matrix()) {
        let n = a.nrows();
        let sample = ShapeSample::new(a).unwrap();
        let res = trace_identity_residuals(&sample);
        let scale = 1.0 + sample.matrix().norm().powi(n as i32);
        prop_assert!(res.max() < 1e-9 * scale, "{res:?}");
    }

    #[test]
    fn symmetric_functions_match_subsets_and_char_poly(a in sym_matrix(), t in -2.0..2.0f64) {
        let n = a.nrows();
        let sample = ShapeSample::new(a.clone()).unwrap();
        let s = elem_sym_all(sample.eigenvalues());
        for r in 0..=n {
            let brute = subset_sum(sample.eigenvalues(), r);
            prop_assert!((s[r] - brute).abs() < 1e-9 * (1.0 + brute.abs()));
        }
        prop_assert!(char_poly_residual(&a, &s, t) < 1e-9);
        prop_assert!((s[n] - a.determinant()).abs() < 1e-9 * (1.0 + s[n].abs()));
    }

    #[test]
    fn umbilic_packs(n in 2usize..=6, lambda in -2.0..2.0f64) {
        let pack = CurvaturePack::from_eigenvalues(&vec![lambda; n]);
        for r in 0..n {
            let b = b_coefficient(n, r);
            let x = -lambda;
            prop_assert!((pack.h[r] - x.powi(r as i32)).abs() < 1e-12 * (1.0 + x.abs()).powi(r as i32));
            prop_assert!((pack.tr_a2p[r] - b * x.powi(r as i32 + 2)).abs() < 1e-10 * (1.0 + x.abs()).powi(r as i32 + 2));
            prop_assert!((pack.tr_p[r] - b * x.powi(r as i32)).abs() < 1e-10 * (1.0 + x.abs()).powi(r as i32));
        }
    }

    #[test]
    fn pack_traces_follow_matrices(a in sym_matrix()) {
        let n = a.nrows();
        let sample = ShapeSample::new(a.clone()).unwrap();
        let pack = curvature_pack(&sample);
        let seq = newton_seq(&sample);
        let a2 = &a * &a;
        let scale = 1.0 + a.norm().powi(n as i32 + 2);
        for r in 0..=n {
            prop_assert!((pack.tr_p[r] - seq.get(r).trace()).abs() < 1e-9 * scale);
            prop_assert!((pack.tr_ap[r] - (&a * seq.get(r)).trace()).abs() < 1e-9 * scale);
            prop_assert!((pack.tr_a2p[r] - (&a2 * seq.get(r)).trace()).abs() < 1e-9 * scale);
        }
    }
}

#[test]
fn known_spectra() {
    let pack = CurvaturePack::from_eigenvalues(&[1.0, 2.0, 3.0]);
    assert_eq!(pack.s, vec![1.0, 6.0, 11.0, 6.0]);
    assert!((pack.h[1] + 2.0).abs() < 1e-15);
    assert!((pack.h[2] - 11.0 / 3.0).abs() < 1e-15);
    assert!((pack.h[3] + 6.0).abs() < 1e-15);
    assert_eq!(b_coefficient(3, 1), 6.0);
    assert_eq!(binomial(6, 3), 20.0);
}

#[test]
fn asymmetric_input_rejected() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
    assert!(ShapeSample::new(a).is_err());
    let big = DMatrix::identity(7, 7);
    assert!(newton_reilly(&ShapeSample::new(big).unwrap(), 1).is_err());
}
