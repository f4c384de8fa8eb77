//! Bundled scenarios.
//!
//! The eight-robot case is a team of planar robots with friction `T_i`
//! and mass `W_i`, two of which turn Byzantine partway through the run.
//! The two-integrator case is the smallest setting with a closed-form
//! optimum.

use crate::attack::{AttackPhase, AttackProfile, IndexExpr, Signal, TriggerTamper, Wave};
use crate::detect::ThresholdSchedule;
use crate::engine::scenario::{
    AgentConfig, GainsConfig, GraphConfig, QuadraticCost, Scenario, SigmaConfig, SimConfig, TriggerConfig,
};
use crate::graph::EdgeSpec;
use crate::timefn::TimeFn;

/// Undirected edges of the robot network, 1-based.
///
/// The network is 3-robust and stays connected after removing any two
/// robots, so two Byzantine robots can be cut off without splitting the
/// rest. Maximum degree is 5.
pub const ROBOT_EDGES: [(usize, usize); 17] = [
    (1, 3),
    (1, 7),
    (1, 8),
    (2, 5),
    (2, 6),
    (2, 7),
    (2, 8),
    (3, 4),
    (3, 5),
    (3, 6),
    (4, 6),
    (4, 7),
    (4, 8),
    (5, 7),
    (5, 8),
    (6, 7),
    (6, 8),
];

pub const ROBOT_POSITIONS: [[f64; 2]; 8] = [
    [1.0, -0.5],
    [0.5, 1.0],
    [1.5, -1.0],
    [-0.5, 0.5],
    [0.5, -1.0],
    [1.0, 1.0],
    [-1.0, 1.5],
    [0.5, 0.5],
];

pub const ROBOT_W0: [[f64; 4]; 8] = [
    [-0.2, -0.1, 0.0, 0.2],
    [-0.1, 0.2, 0.1, 0.3],
    [0.1, 0.2, -0.4, 0.1],
    [0.4, -0.2, -0.3, 0.1],
    [-0.4, 0.0, 0.2, 0.1],
    [0.2, 0.1, 0.0, 0.3],
    [0.1, -0.2, -0.2, 0.3],
    [0.2, 0.3, -0.1, 0.1],
];

pub const ROBOT_HORIZON: f64 = 80.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const EXACT_DT: f64 = 1e-4;

/// Friction of robot `i` (1-based).
pub fn friction(i: usize) -> f64 {
    1.0 - 0.1 * i as f64
}

/// Mass of robot `i` (1-based). Negative for several robots; kept as is.
pub fn mass(i: usize) -> f64 {
    0.2 * (2.0 * i as f64).sin()
}

/// Robots whose mass formula yields a negative value.
pub fn negative_mass_robots() -> Vec<usize> {
    (1..=8).filter(|&i| mass(i) < 0.0).collect()
}

fn robot_agent(i: usize) -> AgentConfig {
    let g = friction(i) / mass(i);
    let a = vec![
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, -g, 0.0],
        vec![0.0, 0.0, 0.0, -g],
    ];
    let b = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![g, 0.0], vec![0.0, g]];
    let c = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
    let p = ROBOT_POSITIONS[i - 1];
    let x0 = vec![p[0], p[1], 0.0, 0.0];
    AgentConfig {
        a,
        b,
        c,
        k: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
        mu_bar: 0.5,
        f: Some(vec![vec![1.5, 0.0], vec![0.0, 1.5]]),
        x0: x0.clone(),
        delta0: Some(x0),
        w0: Some(ROBOT_W0[i - 1].to_vec()),
        cost: Some(QuadraticCost {
            center: p.to_vec(),
            weight: 1.0,
        }),
    }
}

fn per_neighbor(coef: f64, power: f64) -> IndexExpr {
    IndexExpr { coef, power }
}

fn constant(coef: f64) -> IndexExpr {
    IndexExpr { coef, power: 0.0 }
}

/// Robot 1: random transmissions that ignore the MEI from 20 s, small
/// deviations on [20, 30) and large ones on [30, 80).
pub fn robot1_attack() -> AttackProfile {
    AttackProfile {
        agent: 1,
        phases: vec![
            AttackPhase {
                start: 20.0,
                end: 30.0,
                delta: Some(Signal {
                    amp: per_neighbor(0.002, 1.0),
                    freq: per_neighbor(0.02, 1.0),
                    wave: Wave::Sin,
                }),
                w: Some(Signal {
                    amp: per_neighbor(0.002, 1.0),
                    freq: per_neighbor(0.02, 1.0),
                    wave: Wave::Cos,
                }),
            },
            AttackPhase {
                start: 30.0,
                end: 80.0,
                delta: Some(Signal {
                    amp: per_neighbor(0.02, 1.0),
                    freq: per_neighbor(0.2, 1.0),
                    wave: Wave::Sin,
                }),
                w: Some(Signal {
                    amp: per_neighbor(0.1, 1.0),
                    freq: per_neighbor(0.2, 1.0),
                    wave: Wave::Cos,
                }),
            },
        ],
        trigger_tamper: TriggerTamper::UniformRandom {
            min_gap: 0.01,
            max_gap: 0.2,
            start: 20.0,
            end: 80.0,
        },
        injection: None,
    }
}

/// Robot 2: respects the MEI but transmits regularly from 50 s with large
/// deviations.
pub fn robot2_attack() -> AttackProfile {
    AttackProfile {
        agent: 2,
        phases: vec![AttackPhase {
            start: 50.0,
            end: 80.0,
            delta: Some(Signal {
                amp: per_neighbor(0.05, 1.0),
                freq: constant(0.2),
                wave: Wave::Cos,
            }),
            w: Some(Signal {
                amp: per_neighbor(0.2, 0.5),
                freq: per_neighbor(0.2, 1.0),
                wave: Wave::Sin,
            }),
        }],
        trigger_tamper: TriggerTamper::UniformRandom {
            min_gap: 0.10,
            max_gap: 0.5,
            start: 50.0,
            end: 80.0,
        },
        injection: None,
    }
}

pub fn eight_robots(dt: f64) -> Scenario {
    let decay = TimeFn::exp_decay(1.0, 0.2);
    let threshold = TimeFn::ExpDecay {
        a: 1.2,
        b: 0.15,
        offset: 1e-3,
    };
    Scenario {
        name: "eight-robots".into(),
        graph: GraphConfig {
            nodes: 8,
            edges: ROBOT_EDGES.iter().map(|&(i, j)| EdgeSpec(i, j, 1.0)).collect(),
        },
        agents: (1..=8).map(robot_agent).collect(),
        gains: GainsConfig {
            rho: 0.1,
            alpha: 0.5,
            beta: 0.5,
            eta: 0.02,
            gamma_delta: decay.clone(),
            gamma_w: decay,
            gamma_c: 0.1,
        },
        trigger: TriggerConfig {
            m0: 1.0,
            c0: 1.0,
            v: 0.2,
            t_mei: 0.10,
            sigma: SigmaConfig::Direct { s1: 3.0, s2: 0.625 },
        },
        thresholds: ThresholdSchedule {
            f_delta: threshold.clone(),
            f_w: threshold,
            margin: 1.05,
        },
        attacks: vec![robot1_attack(), robot2_attack()],
        sim: SimConfig {
            dt,
            horizon: ROBOT_HORIZON,
            seed: 0,
            record_interval: 0.1,
            state_bound: 1e3,
        },
    }
}

/// Two single integrators with costs centered at 0 and 2.
pub fn two_integrators() -> Scenario {
    let agent = |center: f64| AgentConfig {
        a: vec![vec![0.0]],
        b: vec![vec![1.0]],
        c: vec![vec![1.0]],
        k: Vec::new(),
        mu_bar: 1.0,
        f: None,
        x0: vec![center],
        delta0: None,
        w0: None,
        cost: Some(QuadraticCost {
            center: vec![center],
            weight: 1.0,
        }),
    };
    let decay = TimeFn::exp_decay(1.0, 0.5);
    Scenario {
        name: "two-integrators".into(),
        graph: GraphConfig {
            nodes: 2,
            edges: vec![EdgeSpec(1, 2, 1.0)],
        },
        agents: vec![agent(0.0), agent(2.0)],
        gains: GainsConfig {
            rho: 1.0,
            alpha: 1.0,
            beta: 1.0,
            eta: 0.02,
            gamma_delta: decay.clone(),
            gamma_w: decay.clone(),
            gamma_c: 0.1,
        },
        trigger: TriggerConfig {
            m0: 1.0,
            c0: 1.0,
            v: 0.2,
            t_mei: 0.05,
            sigma: SigmaConfig::Direct { s1: 3.0, s2: 0.625 },
        },
        thresholds: ThresholdSchedule {
            f_delta: TimeFn::exp_decay(2.0, 0.4),
            f_w: TimeFn::exp_decay(2.0, 0.4),
            margin: 1.05,
        },
        attacks: Vec::new(),
        sim: SimConfig {
            dt: 1e-3,
            horizon: 60.0,
            seed: 0,
            record_interval: 0.1,
            state_bound: 1e3,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, r_connected, r_isolatable, Graph};

    #[test]
    fn robot_graph_properties() {
        let edges: Vec<_> = ROBOT_EDGES.iter().map(|&(i, j)| EdgeSpec(i, j, 1.0)).collect();
        let g = Graph::from_specs(8, &edges).unwrap();
        assert_eq!(laplacian(&g).max_degree, 5.0);
        assert!(r_connected(&g, 3).unwrap());
        assert!(r_isolatable(&g, 2).unwrap());
        assert_eq!(g.neighbors(0), vec![2, 6, 7]);
    }

    #[test]
    fn normal_optimum_is_mean_of_normal_positions() {
        let normal = &ROBOT_POSITIONS[2..];
        let mean_x: f64 = normal.iter().map(|p| p[0]).sum::<f64>() / 6.0;
        let mean_y: f64 = normal.iter().map(|p| p[1]).sum::<f64>() / 6.0;
        assert!((mean_x - 1.0 / 3.0).abs() < 1e-15);
        assert!((mean_y - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_masses_are_flagged() {
        assert_eq!(negative_mass_robots(), vec![2, 3, 5, 6, 8]);
    }

    #[test]
    fn bundled_scenarios_validate() {
        eight_robots(DEFAULT_DT).validate().unwrap();
        eight_robots(DEFAULT_DT).without_attacks().validate().unwrap();
        two_integrators().validate().unwrap();
    }
}
