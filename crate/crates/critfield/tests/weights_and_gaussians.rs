use critfield::gaussian_toolkit::{
    condition_gaussian, gaussian_expectation, hermite, HomogeneousFn, SymmetricMatrix,
};
use critfield::spectral_weights::{covariance_jet, WeightFamily, WeightSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family() -> impl Strategy<Value = WeightSpec<f64>> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|a| WeightSpec::new(WeightFamily::Gaussian, a, 1e-12).unwrap()),
        (0.5f64..2.0).prop_map(|r| WeightSpec::bump(r).unwrap()),
        (10.0f64..14.0).prop_map(|e| WeightSpec::rational(e).unwrap()),
    ]
}

/// Random PSD matrix `L L^T` with a nonzero diagonal in `L`.
fn psd(n: usize) -> impl Strategy<Value = SymmetricMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        SymmetricMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| {
                    let l = |r: usize, c: usize| if c > r { 0.0 } else if c == r { 1.0 + v[r * n + c].abs() } else { v[r * n + c] };
                    l(i, k) * l(j, k)
                })
                .sum()
        })
    })
}

fn explicit_hermite(n: usize, x: f64) -> f64 {
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    (0..=n / 2)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * fact(n) / (fact(j) * fact(n - 2 * j) * 2f64.powi(j as i32)) * x.powi((n - 2 * j) as i32)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radial_moments_are_positive(spec in family(), k in 0u32..8) {
        prop_assert!(spec.radial_moment(k).unwrap() > 0.0);
    }

    #[test]
    fn jet_parity(spec in family(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let plus = covariance_jet(&spec, 2, &[x, y], 4).unwrap();
        let minus = covariance_jet(&spec, 2, &[-x, -y], 4).unwrap();
        for (a, (p, q)) in plus.indices().iter().zip(plus.values().iter().zip(minus.values())) {
            let sign = if a.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((p - sign * q).abs() <= 1e-10 * (1.0 + p.abs()), "{a:?}: {p} vs {q}");
        }
    }

    #[test]
    fn hessian_at_origin_is_isotropic(spec in family()) {
        let h = covariance_jet(&spec, 2, &[0.0, 0.0], 2).unwrap().hessian();
        let lam2 = -h[0][0];
        prop_assert!(lam2 > 0.0);
        prop_assert!((h[1][1] - h[0][0]).abs() < 1e-8 * lam2);
        prop_assert!(h[0][1].abs() < 1e-8 * lam2);
    }

    #[test]
    fn empty_conditioning_is_identity(cov in psd(4)) {
        let c = condition_gaussian(&cov, &[], &[]).unwrap();
        prop_assert_eq!(c.remaining, vec![0, 1, 2, 3]);
        prop_assert!(c.mean.iter().all(|&v| v == 0.0));
        prop_assert!(c.cov.sub(&cov).max_abs() == 0.0);
    }

    #[test]
    fn schur_complement_is_psd(cov in psd(5), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let c = condition_gaussian(&cov, &[1, 3], &[a, b]).unwrap();
        let floor = -1e-10 * cov.max_abs();
        prop_assert!(c.cov.eigenvalues().iter().all(|&e| e >= floor));
        prop_assert!(c.observed_density > 0.0);
    }

    #[test]
    fn hermite_recurrence_matches_explicit_sum(n in 0usize..=10, x in -4.0f64..4.0) {
        let want = explicit_hermite(n, x);
        prop_assert!((hermite(n, x) - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn abs_det_expectation_is_homogeneous(cov in psd(3), t in 0.1f64..10.0, seed in 0u64..1000) {
        let f = HomogeneousFn::AbsDet { m: 2 };
        let (base, _) = gaussian_expectation(f, &cov, 2000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (scaled, _) = gaussian_expectation(f, &cov.scaled(t), 2000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!((scaled / (t * base) - 1.0).abs() < 1e-10);
    }
}
