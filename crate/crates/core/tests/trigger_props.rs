use proptest::prelude::*;
use resilient_optsim::trigger::{activation_step, kappa, t0, t_hat0, t_mei_for, zero_crossing, MeiPolicy, SigmaCoeffs};

/// Closed-form solution of `m' = -(s1 m + s2)` from `m0`.
fn m_exact(s1: f64, s2: f64, m0: f64, t: f64) -> f64 {
    (-s1 * t).exp() * (m0 + s2 / s1) - s2 / s1
}

fn bisect_zero(s1: f64, s2: f64, m0: f64) -> f64 {
    let mut hi = 1.0;
    while m_exact(s1, s2, m0, hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m_exact(s1, s2, m0, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn t0_is_strictly_below_the_zero_crossing(s1 in 0.1f64..10.0, s2 in 0.1f64..10.0, m in 0.01f64..10.0) {
        let bound = t0(s1, s2, m).unwrap();
        let exact = bisect_zero(s1, s2, m);
        prop_assert!(bound < exact, "t0 {bound} vs crossing {exact}");
        prop_assert!((zero_crossing(s1, s2, m).unwrap() - exact).abs() < 1e-9 * (1.0 + exact));
    }

    #[test]
    fn band_bound_never_exceeds_t0(c_hat in 1.0f64..2.0, v in 0.05f64..0.5, s1 in 0.5f64..5.0, s2 in 0.1f64..2.0, m0 in 0.2f64..2.0) {
        let coeffs = SigmaCoeffs { s1, s2 };
        let k = kappa(c_hat, 1.0, v);
        prop_assert!(k > c_hat);
        prop_assert!(k <= c_hat + v + 1e-12);
        let (sig1, sig2) = coeffs.at(c_hat);
        let bound = t_hat0(&coeffs, k, m0).unwrap();
        prop_assert!(bound <= t0(sig1, sig2, m0 / c_hat).unwrap());
        let policy = MeiPolicy { configured: 10.0, m0, c0: 1.0, v };
        let d = t_mei_for(c_hat, &coeffs, &policy).unwrap();
        prop_assert!(d.clamped && d.t_mei == bound);
    }

    #[test]
    fn activation_stays_positive_until_t0(s1 in 0.1f64..10.0, s2 in 0.1f64..10.0, m in 0.01f64..10.0, steps in 1usize..200) {
        let horizon = t0(s1, s2, m).unwrap();
        let dt = horizon / steps as f64;
        let mut cur = m;
        for _ in 0..steps {
            cur = activation_step(cur, true, dt, s1, s2).unwrap();
            prop_assert!(cur > 0.0);
        }
        prop_assert!((cur - m_exact(s1, s2, m, horizon)).abs() < 1e-9 * (1.0 + m));
    }
}
