use isoball_core::lemma::{check_det_inequality, check_weighted_inverse, dominates, whitened_form, SpdPair};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `(B, B + PᵀP)` with `B = MᵀM + I` from raw entries.
fn pair_strategy() -> impl Strategy<Value = SpdPair> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0..2.0f64, n * n),
            prop::collection::vec(-1.0..1.0f64, n * n),
        )
            .prop_map(move |(m, p)| {
                let m = DMatrix::from_vec(n, n, m);
                let p = DMatrix::from_vec(n, n, p);
                let b = m.transpose() * &m + DMatrix::identity(n, n);
                let a = &b + p.transpose() * &p;
                SpdPair::new((&a + a.transpose()) * 0.5, b).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn determinant_is_monotone(pair in pair_strategy()) {
        let v = check_det_inequality(&pair);
        prop_assert!(v.holds);
        prop_assert!(v.det_a >= v.det_b * (1.0 - 1e-10));
        prop_assert!(v.equality_consistent);
    }

    #[test]
    fn inverse_reverses_order(pair in pair_strategy(), seed in prop::collection::vec(-1.0..1.0f64, 6)) {
        let v = DVector::from_iterator(pair.dim(), seed.into_iter().take(pair.dim()));
        prop_assume!(v.norm() > 1e-3);
        let w = check_weighted_inverse(&pair, &v).unwrap();
        prop_assert!(w.holds, "{} > {}", w.lhs, w.rhs);
    }

    #[test]
    fn whitened_eigenvalues_at_least_one(pair in pair_strategy()) {
        let w = whitened_form(&pair);
        prop_assert!(w.eigenvalues.iter().all(|&l| l >= 1.0 - 1e-10));
        prop_assert!(w.holds);
        prop_assert!(dominates(&pair.a, &pair.b).unwrap().dominates);
    }
}

#[test]
fn equal_pair_hits_the_equality_branch() {
    let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
    let v = check_det_inequality(&SpdPair::new(b.clone(), b).unwrap());
    assert!(v.holds && v.equality && v.equality_consistent);
}
