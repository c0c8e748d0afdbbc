use jacobi_corners::asymptotics::{
    c2, f_limit, frozen_boundary, limit_covariance_p, limit_covariance_with, omega, ContourMethod,
};
use num_complex::Complex64;
use jacobi_corners::exact;
use jacobi_corners::ho::{self, HOPoint};
use jacobi_corners::model::{log_joint_density, ObservableSpec};
use jacobi_corners::quadrature::QuadSpec;
use jacobi_corners::sampler::{sample_corners, SamplerConfig};
use jacobi_corners::{EnsembleParams, Error, HatParams, LevelHeight};
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use proptest::prelude::*;

fn hat() -> impl Strategy<Value = (HatParams, LevelHeight)> {
    (0.05f64..3.0, 0.05f64..3.0, 0.05f64..3.0)
        .prop_map(|(m, a, n)| (HatParams::new(m, a).unwrap(), LevelHeight::new(n).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn samples_interlace_inside_unit_interval(
        theta in 0.3f64..4.0,
        alpha in 0.3f64..4.0,
        m in 1usize..4,
        n in 1usize..5,
        seed in any::<u64>(),
    ) {
        let p = EnsembleParams::new(theta, alpha, m).unwrap();
        let cfg = SamplerConfig { burn_in: 20, ..SamplerConfig::with_seed(seed) };
        for c in sample_corners(&p, n, &cfg, 5).unwrap() {
            prop_assert!(c.validate(m).is_ok());
            prop_assert!(log_joint_density(&p, n, &c).unwrap().is_finite());
        }
    }

    #[test]
    fn level_one_mean_is_beta_mean(
        (tn, td) in (1i64..8, 1i64..5),
        (an, ad) in (1i64..10, 1i64..4),
        m in 1usize..5,
    ) {
        let (theta, alpha) = (Rational64::new(tn, td), Rational64::new(an, ad));
        let p = EnsembleParams::from_ratios(theta, alpha, m).unwrap();
        let v = exact::expectation_p(&p, &[(1, 1)]).unwrap();
        let al = BigRational::new(BigInt::from(*alpha.numer()), BigInt::from(*alpha.denom()));
        let want = &al / (&al + BigRational::from_integer(m.into()));
        prop_assert_eq!(v.as_rational(), Some(&want));
    }

    #[test]
    fn exact_covariance_is_symmetric_in_levels(
        (tn, td) in (1i64..5, 1i64..3),
        alpha in 1i64..5,
        m in 1usize..4,
    ) {
        let p = EnsembleParams::from_ratios(Rational64::new(tn, td), Rational64::from_integer(alpha), m).unwrap();
        let opts = exact::EvalOptions::default();
        let (a, b) = (ObservableSpec::power(2, 3), ObservableSpec::power(1, 2));
        let ab = exact::covariance(&p, &a, &b, &opts).unwrap();
        let ba = exact::covariance(&p, &b, &a, &opts).unwrap();
        prop_assert_eq!(ab.as_rational(), ba.as_rational());
    }

    #[test]
    fn frozen_boundary_is_an_interval_in_unit_interval((hp, nh) in hat()) {
        let (l, r) = frozen_boundary(&hp, nh);
        prop_assert!(0.0 <= l && l < r && r <= 1.0, "({l}, {r})");
    }

    #[test]
    fn omega_inverts_the_limit_map((hp, nh) in hat(), s in 0.02f64..0.98) {
        let (l, r) = frozen_boundary(&hp, nh);
        let x = l + s * (r - l);
        let z = omega(&hp, nh, x).unwrap();
        prop_assert!(z.im > 0.0);
        prop_assert!((f_limit(&hp, nh, 1, z).unwrap() - x).norm() < 1e-9);
    }

    #[test]
    fn variance_of_p1_is_c2_over_theta((hp, nh) in hat(), theta in 0.2f64..5.0) {
        let v = limit_covariance_p(&hp, theta, (nh, 1), (nh, 1)).unwrap();
        let want = c2(&hp, nh) / theta;
        prop_assert!((v - want).abs() <= 1e-9 * want, "{v} vs {want}");
    }

    #[test]
    fn contour_methods_agree_on_nested_levels((hp, nh) in hat(), lift in 0.05f64..1.5) {
        let upper = LevelHeight::new(nh.get() + lift).unwrap();
        let g = |u: Complex64| u * u;
        let b = limit_covariance_with(&hp, 1.0, (upper, &g), (nh, &g), ContourMethod::PoleComplement).unwrap();
        // two nearly coincident circles may exhaust the node budget
        match limit_covariance_with(&hp, 1.0, (upper, &g), (nh, &g), ContourMethod::OmegaCircles) {
            Ok(a) => prop_assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}"),
            Err(e) => prop_assert!(matches!(e, Error::Numeric(_)), "{e}"),
        }
    }

    #[test]
    fn covariance_is_continuous_as_levels_merge((hp, nh) in hat()) {
        let upper = LevelHeight::new(nh.get() * (1.0 + 1e-7)).unwrap();
        let merged = limit_covariance_p(&hp, 1.0, (nh, 2), (nh, 1)).unwrap();
        let split = limit_covariance_p(&hp, 1.0, (upper, 2), (nh, 1)).unwrap();
        prop_assert!((merged - split).abs() <= 1e-5 * merged.abs(), "{merged} vs {split}");
    }

    #[test]
    fn ho_is_symmetric_and_homogeneous(
        theta in 0.4f64..2.5,
        r1 in 0.6f64..2.5,
        frac in 0.2f64..0.8,
        y in (-1.0f64..1.0, -1.0f64..1.0),
        shift in -0.5f64..0.5,
    ) {
        let r = vec![r1, r1 * frac];
        let q = QuadSpec::default();
        let base = ho::ho_eval(&HOPoint::new(r.clone(), vec![y.0, y.1], theta).unwrap(), &q).unwrap();
        let swapped = ho::ho_eval(&HOPoint::new(r.clone(), vec![y.1, y.0], theta).unwrap(), &q).unwrap();
        prop_assert!((base - swapped).abs() <= 1e-9 * base.abs());
        let moved = ho::ho_eval(&HOPoint::new(r.clone(), vec![y.0 + shift, y.1 + shift], theta).unwrap(), &q).unwrap();
        let want = (shift * (r[0] + r[1])).exp() * base;
        prop_assert!((moved - want).abs() <= 1e-9 * want.abs());
    }
}
