use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use resilient_optsim::plant::{verify_theorem2, AgentModel};

#[derive(Debug, Clone)]
struct Case {
    model: AgentModel,
    x: DVector<f64>,
    delta: DVector<f64>,
    delta_dot: DVector<f64>,
    combo: DVector<f64>,
}

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

prop_compose! {
    fn case()(n1 in 0usize..=2, p in 1usize..=2, q in 1usize..=2)
        (n1 in Just(n1), p in Just(p), q in Just(q),
         a in entries((n1 + p) * (n1 + p)),
         bb in entries(p * p),
         c in entries(q * (n1 + p)),
         k in entries(p * n1),
         mu_bar in 0.1f64..2.0,
         x in entries(n1 + p),
         delta in entries(n1 + p),
         delta_dot in entries(n1 + p),
         combo in entries(n1 + p))
        -> Case {
        let n = n1 + p;
        let mut b = DMatrix::zeros(n, p);
        let mut b_bar = DMatrix::from_row_slice(p, p, &bb);
        for i in 0..p {
            b_bar[(i, i)] += 5.0;
        }
        b.view_mut((n1, 0), (p, p)).copy_from(&b_bar);
        let model = AgentModel::new(
            &DMatrix::from_row_slice(n, n, &a),
            &b,
            &DMatrix::from_row_slice(q, n, &c),
            DMatrix::from_row_slice(p, n1, &k),
            mu_bar,
            None,
        ).unwrap();
        Case {
            model,
            x: DVector::from_vec(x),
            delta: DVector::from_vec(delta),
            delta_dot: DVector::from_vec(delta_dot),
            combo: DVector::from_vec(combo),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn controller_forms_agree(c in case()) {
        let u1 = c.model.controller(&c.x, &c.delta, &c.delta_dot).unwrap();
        let u2 = c.model.controller_tracking_form(&c.x, &c.delta, &c.delta_dot).unwrap();
        let scale = u1.norm().max(u2.norm()).max(1e-12);
        prop_assert!((&u1 - &u2).norm() / scale < 1e-10, "u1={u1} u2={u2}");
    }

    #[test]
    fn closed_loop_tracking_error_decays_at_rate_f(c in case()) {
        // With u from the controller, d/dt Kbar(x - delta) = -F Kbar(x - delta).
        let m = &c.model;
        let u = m.controller(&c.x, &c.delta, &c.delta_dot).unwrap();
        let x_dot = &m.a * &c.x + &m.b * u;
        let chi2 = m.tracking_error(&c.x, &c.delta).chi2;
        let chi2_dot = &m.k_bar * (x_dot - &c.delta_dot);
        let expected = -(&m.f * &chi2);
        let scale = 1.0 + expected.norm();
        prop_assert!((chi2_dot - expected).norm() / scale < 1e-9);
    }

    #[test]
    fn steady_state_set_satisfies_upper_block(c in case()) {
        let m = &c.model;
        let set = m.steady_state_set();
        let basis = &set.kernel_basis;
        prop_assume!(basis.ncols() > 0);
        let v = basis * DVector::from_iterator(basis.ncols(), c.combo.iter().copied().take(basis.ncols()));
        let n1 = m.n1;
        let upper = &m.a11 * v.rows(0, n1) + &m.a12 * v.rows(n1, m.state_dim() - n1);
        prop_assert!(upper.norm() < 1e-9 * (1.0 + v.norm()));
        prop_assert!((&m.c * basis - &set.output_basis).amax() < 1e-12);
    }

    #[test]
    fn negative_scaled_identity_gain_passes(mu_bar in 0.2f64..4.0, scale in 0.5f64..3.0) {
        let a12 = DMatrix::<f64>::identity(2, 2);
        let k = DMatrix::<f64>::identity(2, 2) * -scale;
        // P = pI makes the LMI read (2p^2 - 2 scale p - mu_bar) I < 0.
        let p = DMatrix::<f64>::identity(2, 2) * (0.25 * mu_bar / (1.0 + scale));
        let check = verify_theorem2(&a12, &k, &p, mu_bar).unwrap();
        prop_assert!(check.hurwitz && check.lmi_ok);
        let flipped = verify_theorem2(&a12, &(-k), &p, mu_bar).unwrap();
        prop_assert!(!flipped.hurwitz);
    }
}
