//! Distributed optimization observer.
//!
//! Each agent runs an auxiliary state `(delta, w)` whose output `C delta`
//! is driven toward the minimizer of the sum of all local costs. Neighbor
//! information enters only through sampled values exchanged at trigger
//! instants.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A user-supplied smooth, strongly convex cost over the output space.
pub trait SmoothCost: Send + Sync {
    fn value(&self, y: &DVector<f64>) -> f64;
    fn gradient(&self, y: &DVector<f64>) -> DVector<f64>;
    fn lipschitz_bound(&self) -> f64;
}

#[derive(Clone)]
pub enum CostFunction {
    /// `weight * ||y - center||^2`
    Quadratic { center: DVector<f64>, weight: f64 },
    Custom(Arc<dyn SmoothCost>),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Quadratic { center, weight } => f
                .debug_struct("Quadratic")
                .field("center", &center.as_slice())
                .field("weight", weight)
                .finish(),
            CostFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CostFunction {
    pub fn quadratic(center: DVector<f64>) -> Self {
        CostFunction::Quadratic {
            center,
            weight: 1.0,
        }
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        match self {
            CostFunction::Quadratic { center, weight } => weight * (y - center).norm_squared(),
            CostFunction::Custom(c) => c.value(y),
        }
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            CostFunction::Quadratic { center, weight } => (y - center) * (2.0 * weight),
            CostFunction::Custom(c) => c.gradient(y),
        }
    }

    /// Lipschitz constant of the gradient.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            CostFunction::Quadratic { weight, .. } => 2.0 * weight,
            CostFunction::Custom(c) => c.lipschitz_bound(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.alpha == 0.0 {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub delta: DVector<f64>,
    pub w: DVector<f64>,
}

/// Sampled outputs on one undirected edge as seen by agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledOutputs {
    /// `C_i deltahat_ji`: agent i's own value at its last transmission to j.
    pub own_delta: DVector<f64>,
    /// `C_j deltahat_ij`: the value last received from j.
    pub their_delta: DVector<f64>,
    pub own_w: DVector<f64>,
    pub their_w: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct EdgeSample<'a> {
    pub neighbor: usize,
    pub weight: f64,
    pub c_hat: f64,
    pub sample: Option<&'a SampledOutputs>,
}

/// Output-space neighbor sums that stay fixed between trigger instants.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// `sum_j a_ij chat_ij (C_i deltahat_ji - C_j deltahat_ij)`
    pub delta: DVector<f64>,
    /// `sum_j a_ij (C_i what_ji - C_j what_ij)`
    pub w: DVector<f64>,
}

impl Coupling {
    pub fn compute(agent: usize, q: usize, edges: &[EdgeSample<'_>]) -> Result<Self> {
        let mut delta = DVector::zeros(q);
        let mut w = DVector::zeros(q);
        for e in edges {
            if e.weight <= 0.0 {
                continue;
            }
            let s = e.sample.ok_or(Error::MissingSample {
                agent,
                neighbor: e.neighbor,
            })?;
            delta += (&s.own_delta - &s.their_delta) * (e.weight * e.c_hat);
            w += (&s.own_w - &s.their_w) * e.weight;
        }
        Ok(Coupling { delta, w })
    }
}

/// `(delta_dot, w_dot)` for one agent given a precomputed coupling.
pub fn rates_with_coupling(
    c: &DMatrix<f64>,
    cost: &CostFunction,
    gains: &ObserverGains,
    delta: &DVector<f64>,
    coupling: &Coupling,
) -> (DVector<f64>, DVector<f64>) {
    let grad = cost.gradient(&(c * delta));
    let ct = c.transpose();
    let w_dot = &ct * &coupling.delta * gains.alpha;
    let delta_dot = -(&ct * (grad * gains.rho + &coupling.w * gains.beta)) - &w_dot;
    (delta_dot, w_dot)
}

pub fn observer_rates(
    agent: usize,
    state: &ObserverState,
    edges: &[EdgeSample<'_>],
    gains: &ObserverGains,
    c: &DMatrix<f64>,
    cost: &CostFunction,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if state.delta.len() != c.ncols() || state.w.len() != c.ncols() {
        return Err(Error::Dimension(format!(
            "observer state has length {}, C has {} columns",
            state.delta.len(),
            c.ncols()
        )));
    }
    let coupling = Coupling::compute(agent, c.nrows(), edges)?;
    Ok(rates_with_coupling(c, cost, gains, &state.delta, &coupling))
}

/// `eta ||C_i deltahat_ji - C_j deltahat_ij||^2`
pub fn weight_rate(eta: f64, own: &DVector<f64>, theirs: &DVector<f64>) -> f64 {
    eta * (own - theirs).norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub kkt_norm: f64,
    pub consensus_norm: f64,
}

/// Stationarity and disagreement of a set of observer outputs.
///
/// The gradients are summed in output space, where every agent's gradient
/// lives regardless of its state dimension.
pub fn optimality_residual(outputs: &[DVector<f64>], costs: &[&CostFunction]) -> Residual {
    assert_eq!(outputs.len(), costs.len());
    let Some(first) = outputs.first() else {
        return Residual {
            kkt_norm: 0.0,
            consensus_norm: 0.0,
        };
    };
    let mut sum = DVector::zeros(first.len());
    for (y, f) in outputs.iter().zip(costs) {
        sum += f.gradient(y);
    }
    let mut consensus: f64 = 0.0;
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            consensus = consensus.max((&outputs[i] - &outputs[j]).norm());
        }
    }
    Residual {
        kkt_norm: sum.norm(),
        consensus_norm: consensus,
    }
}
