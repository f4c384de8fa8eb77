use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use resilient_optsim::detect::{badi_on_receive, Decision, ReceiveRecord, ThresholdSchedule, Topology};
use resilient_optsim::graph::Graph;
use resilient_optsim::timefn::TimeFn;

fn schedule() -> ThresholdSchedule {
    ThresholdSchedule {
        f_delta: TimeFn::exp_decay(1.0, 0.1),
        f_w: TimeFn::exp_decay(1.0, 0.1),
        margin: 1.05,
    }
}

fn vec2() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn early_reception_is_always_an_interval_violation(
        last in 0.0f64..50.0,
        t_mei in 0.01f64..1.0,
        frac in 0.0f64..0.99,
        d_old in vec2(), d_new in vec2(), w_old in vec2(), w_new in vec2(),
        c in 1.0f64..5.0,
    ) {
        let rec = ReceiveRecord { last_time: last, delta: d_old, w: w_old, t_mei };
        let v = badi_on_receive(&rec, last + frac * t_mei, &d_new, &w_new, c, &schedule(), &DMatrix::identity(2, 2));
        prop_assert_eq!(v.decision, Decision::IsolateTic);
    }

    #[test]
    fn identical_samples_after_the_mei_are_accepted(
        last in 0.0f64..50.0,
        t_mei in 0.01f64..1.0,
        extra in 0.0f64..2.0,
        d in vec2(), w in vec2(),
    ) {
        let rec = ReceiveRecord { last_time: last, delta: d.clone(), w: w.clone(), t_mei };
        let v = badi_on_receive(&rec, last + t_mei + extra, &d, &w, 1.0, &schedule(), &DMatrix::identity(2, 2));
        prop_assert_eq!(v.decision, Decision::Accept);
    }

    #[test]
    fn isolation_changes_one_private_entry(
        n in 3usize..=7,
        seed_edges in prop::collection::vec((0usize..7, 0usize..7), 4..20),
        pick in any::<prop::sample::Index>(),
    ) {
        let edges: Vec<(usize, usize, f64)> = seed_edges
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a, b, 1.0))
            .collect();
        prop_assume!(!edges.is_empty());
        let g = Graph::from_edges(n, &edges).unwrap();
        let all = g.edges();
        let (i, j, _) = all[pick.index(all.len())];
        let mut topo = Topology::new(&g);
        let before: Vec<f64> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| topo.weight(a, b)).collect();
        prop_assert!(topo.isolate(i, j).unwrap());
        prop_assert!(!topo.isolate(i, j).unwrap());
        let mut changed = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if topo.weight(a, b) != before[a * n + b] {
                    changed.push((a, b));
                }
            }
        }
        prop_assert_eq!(changed, vec![(i, j)]);
        prop_assert!(topo.is_active(j, i));
    }
}
