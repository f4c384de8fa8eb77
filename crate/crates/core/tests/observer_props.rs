use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use resilient_optsim::observer::{
    optimality_residual, rates_with_coupling, weight_rate, Coupling, CostFunction, EdgeSample, ObserverGains,
    SampledOutputs,
};

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

/// Observer rates of a whole network whose samples equal the current
/// states, as a function of the stacked `(delta, w)`.
#[derive(Debug)]
struct Network {
    edges: Vec<(usize, usize, f64)>,
    c: Vec<DMatrix<f64>>,
    costs: Vec<CostFunction>,
    gains: ObserverGains,
}

impl Network {
    fn dims(&self) -> Vec<usize> {
        self.c.iter().map(|c| c.ncols()).collect()
    }

    fn total(&self) -> usize {
        2 * self.dims().iter().sum::<usize>()
    }

    fn split(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let dims = self.dims();
        let half = z.len() / 2;
        let (mut deltas, mut ws, mut off) = (Vec::new(), Vec::new(), 0);
        for d in dims {
            deltas.push(z.rows(off, d).into_owned());
            ws.push(z.rows(half + off, d).into_owned());
            off += d;
        }
        (deltas, ws)
    }

    fn rates(&self, z: &DVector<f64>) -> DVector<f64> {
        let (deltas, ws) = self.split(z);
        let n = self.c.len();
        let samples: Vec<Vec<(usize, f64, SampledOutputs)>> = (0..n)
            .map(|i| {
                self.edges
                    .iter()
                    .filter_map(|&(a, b, w)| match (a == i, b == i) {
                        (true, _) => Some((b, w)),
                        (_, true) => Some((a, w)),
                        _ => None,
                    })
                    .map(|(j, w)| {
                        let s = SampledOutputs {
                            own_delta: &self.c[i] * &deltas[i],
                            their_delta: &self.c[j] * &deltas[j],
                            own_w: &self.c[i] * &ws[i],
                            their_w: &self.c[j] * &ws[j],
                        };
                        (j, w, s)
                    })
                    .collect()
            })
            .collect();
        let mut d_dots = Vec::new();
        let mut w_dots = Vec::new();
        for i in 0..n {
            let edges: Vec<EdgeSample<'_>> = samples[i]
                .iter()
                .map(|(j, w, s)| EdgeSample { neighbor: *j, weight: *w, c_hat: 1.0, sample: Some(s) })
                .collect();
            let coupling = Coupling::compute(i, self.c[i].nrows(), &edges).unwrap();
            let (dd, wd) = rates_with_coupling(&self.c[i], &self.costs[i], &self.gains, &deltas[i], &coupling);
            d_dots.push(dd);
            w_dots.push(wd);
        }
        DVector::from_iterator(self.total(), d_dots.iter().chain(&w_dots).flat_map(|v| v.iter().copied()))
    }
}

prop_compose! {
    fn network()(dims in prop::collection::vec(1usize..=2, 3),
                 triangle in any::<bool>(),
                 rows in prop::collection::vec(prop::collection::vec(0.3f64..1.5, 2), 3),
                 signs in prop::collection::vec(any::<bool>(), 3),
                 centers in vec_of(3),
                 weights in prop::collection::vec(0.5f64..2.0, 3),
                 rho in 0.1f64..2.0, alpha in 0.1f64..2.0, beta in 0.1f64..2.0)
        -> Network {
        let mut edges = vec![(0, 1, 1.0), (1, 2, 0.5)];
        if triangle {
            edges.push((0, 2, 2.0));
        }
        let c = dims.iter().zip(&rows).zip(&signs).map(|((&d, r), &neg)| {
            let mut row = DMatrix::from_row_slice(1, d, &r[..d]);
            if neg {
                row *= -1.0;
            }
            row
        }).collect();
        let costs = centers.iter().zip(&weights).map(|(&c, &w)| CostFunction::Quadratic {
            center: DVector::from_element(1, c),
            weight: w,
        }).collect();
        Network { edges, c, costs, gains: ObserverGains { rho, alpha, beta } }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equilibria_are_optimal_and_in_consensus(net in network()) {
        // The rate map is affine; find a zero by least squares.
        let m = net.total();
        let zero = DVector::zeros(m);
        let offset = net.rates(&zero);
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            jac.set_column(k, &(net.rates(&e) - &offset));
        }
        let z = jac.clone().svd(true, true).solve(&(-&offset), 1e-12).unwrap();
        let at_z = net.rates(&z);
        prop_assert!(at_z.norm() < 1e-8, "no equilibrium found, residual {}", at_z.norm());
        let (deltas, _) = net.split(&z);
        let outputs: Vec<_> = deltas.iter().zip(&net.c).map(|(d, c)| c * d).collect();
        let costs: Vec<_> = net.costs.iter().collect();
        let res = optimality_residual(&outputs, &costs);
        prop_assert!(res.kkt_norm < 1e-6 && res.consensus_norm < 1e-6, "{res:?}");
    }

    #[test]
    fn dual_sum_is_conserved_with_identical_outputs(
        net in network(),
        state in vec_of(12),
        chat in prop::collection::vec(1.0f64..3.0, 3),
    ) {
        // Same C everywhere, symmetric edge weights: the w rates cancel.
        let c = DMatrix::from_row_slice(1, 2, &[0.7, -1.1]);
        let d: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_column_slice(&state[2 * i..2 * i + 2])).collect();
        let w: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_column_slice(&state[6 + 2 * i..6 + 2 * i + 2])).collect();
        let mut total = DVector::zeros(2);
        for i in 0..3 {
            let owned: Vec<(usize, f64, f64, SampledOutputs)> = net.edges.iter().enumerate()
                .filter_map(|(k, &(a, b, wt))| {
                    let j = if a == i { b } else if b == i { a } else { return None };
                    Some((j, wt, chat[k], SampledOutputs {
                        own_delta: &c * &d[i], their_delta: &c * &d[j],
                        own_w: &c * &w[i], their_w: &c * &w[j],
                    }))
                })
                .collect();
            let edges: Vec<EdgeSample<'_>> = owned.iter()
                .map(|(j, wt, ch, s)| EdgeSample { neighbor: *j, weight: *wt, c_hat: *ch, sample: Some(s) })
                .collect();
            let coupling = Coupling::compute(i, 1, &edges).unwrap();
            let (_, w_dot) = rates_with_coupling(&c, &net.costs[i], &net.gains, &d[i], &coupling);
            total += w_dot;
        }
        prop_assert!(total.norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(
        center in vec_of(3),
        weight in 0.1f64..3.0,
        y in vec_of(3),
    ) {
        let f = CostFunction::Quadratic { center: DVector::from_vec(center), weight };
        let y = DVector::from_vec(y);
        let g = f.gradient(&y);
        let h = 1e-5;
        for k in 0..3 {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (f.value(&up) - f.value(&dn)) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()));
        }
    }

    #[test]
    fn weight_rate_is_nonnegative(eta in 0.0f64..1.0, a in vec_of(2), b in vec_of(2)) {
        prop_assert!(weight_rate(eta, &DVector::from_vec(a), &DVector::from_vec(b)) >= 0.0);
    }
}
