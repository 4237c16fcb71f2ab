use exbound::european::{critical_price_european, price_european_put};
use exbound::levy::{JumpFamily, LevyMeasureSpec, LevyModel};
use exbound::stopping::{v_lambda_beta, StoppingProblem, YGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn kou(r: f64, delta: f64, sigma: f64, lp: f64, ep: f64, lm: f64, em: f64) -> LevyModel {
    LevyModel::new(
        r,
        delta,
        sigma,
        LevyMeasureSpec::new(JumpFamily::Kou { lambda_plus: lp, eta_plus: ep, lambda_minus: lm, eta_minus: em }),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exponent_vanishes_at_zero_and_minus_i(
        r in 0.0f64..0.1, delta in 0.0f64..0.1, sigma in 0.05f64..0.5,
        lp in 0.0f64..2.0, ep in 2.0f64..20.0, lm in 0.0f64..2.0, em in 1.0f64..20.0,
    ) {
        let m = kou(r, delta, sigma, lp, ep, lm, em);
        prop_assert!(m.characteristic_exponent(Complex64::new(0.0, 0.0)).unwrap().norm() < 1e-12);
        prop_assert!(m.characteristic_exponent(Complex64::new(0.0, -1.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn european_put_is_bounded_decreasing_and_convex(
        r in 0.0f64..0.1, sigma in 0.1f64..0.5, lm in 0.0f64..1.5, em in 2.0f64..15.0, theta in 0.05f64..1.0,
    ) {
        let m = kou(r, 0.0, sigma, 0.3, 10.0, lm, em);
        let spots: Vec<f64> = (0..25).map(|i| 60.0 * (1.0f64 + i as f64 * 0.04)).collect();
        let p: Vec<f64> = spots.iter().map(|&s| price_european_put(&m, theta, s, 100.0).unwrap().value).collect();
        for (s, v) in spots.iter().zip(&p) {
            prop_assert!(*v >= (100.0 * (-r * theta).exp() - s).max(0.0) - 1e-8);
            prop_assert!(*v <= 100.0);
        }
        for w in p.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
        // second differences on a uniform grid in s
        for i in 1..spots.len() - 1 {
            let (h0, h1) = (spots[i] - spots[i - 1], spots[i + 1] - spots[i]);
            let slope = (p[i + 1] - p[i]) / h1 - (p[i] - p[i - 1]) / h0;
            prop_assert!(slope >= -1e-8 * 100.0, "i={i} {slope}");
        }
    }

    #[test]
    fn european_critical_price_is_monotone_in_time(sigma in 0.1f64..0.4, r in 0.02f64..0.1) {
        let m = LevyModel::black_scholes(r, 0.0, sigma).unwrap();
        let b: Vec<f64> = [1e-3, 1e-2, 1e-1].iter().map(|&th| critical_price_european(&m, th, 100.0).unwrap()).collect();
        prop_assert!(b[0] >= b[1] && b[1] >= b[2], "{b:?}");
        prop_assert!(b[0] < 100.0);
    }

    #[test]
    fn classification_is_pure(lm in 0.0f64..2.0, em in 1.0f64..20.0, delta in 0.0f64..0.1) {
        let m = kou(0.05, delta, 0.2, 0.2, 10.0, lm, em);
        prop_assert_eq!(m.classify_regime(100.0), m.classify_regime(100.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn stopping_value_is_nonnegative_and_nondecreasing(lambda in 0.1f64..2.0, beta in 0.0f64..2.0) {
        let grid = YGrid { lo: -3.0, hi: 3.0, step: 4e-3 };
        let v = v_lambda_beta(&StoppingProblem { grid, ..StoppingProblem::new(lambda, beta) }).unwrap();
        prop_assert!(v.v.iter().all(|&x| x >= 0.0));
        prop_assert!(v.v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert!(v.y_star.is_finite());
    }
}
