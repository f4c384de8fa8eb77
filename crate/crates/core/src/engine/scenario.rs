//! JSON scenario documents.
//!
//! Matrices are row-major nested arrays; node and agent labels are 1-based.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attack::AttackProfile;
use crate::detect::{validate_thresholds, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::graph::{laplacian, EdgeSpec, Graph};
use crate::observer::{CostFunction, ObserverGains};
use crate::plant::AgentModel;
use crate::timefn::TimeFn;
use crate::trigger::{MeiPolicy, SigmaCoeffs, TheoremConstants, TheoremInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub graph: GraphConfig,
    pub agents: Vec<AgentConfig>,
    pub gains: GainsConfig,
    pub trigger: TriggerConfig,
    pub thresholds: ThresholdSchedule,
    #[serde(default)]
    pub attacks: Vec<AttackProfile>,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub nodes: usize,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    /// `p x n1` tracking gain; may be empty when `n1 = 0`.
    #[serde(default)]
    pub k: Vec<Vec<f64>>,
    pub mu_bar: f64,
    /// Overrides the default `mu_bar I + A12' A12`.
    #[serde(default)]
    pub f: Option<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    /// Defaults to `x0`.
    #[serde(default)]
    pub delta0: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default)]
    pub w0: Option<Vec<f64>>,
    /// Defaults to a unit quadratic centered at the initial output.
    #[serde(default)]
    pub cost: Option<QuadraticCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsConfig {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Adaptation rate shared by every edge.
    pub eta: f64,
    pub gamma_delta: TimeFn,
    pub gamma_w: TimeFn,
    pub gamma_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub m0: f64,
    /// Initial edge weight, also the base of the kappa bands.
    pub c0: f64,
    pub v: f64,
    pub t_mei: f64,
    pub sigma: SigmaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaConfig {
    /// `sigma1 = s1 x`, `sigma2 = s2 x`.
    Direct { s1: f64, s2: f64 },
    /// From the convergence constants. `lambda_m_c` defaults to the largest
    /// singular value over all output maps and `phi` to 1.1 times its lower
    /// bound.
    Derived {
        #[serde(default)]
        lambda_m_c: Option<f64>,
        #[serde(default)]
        phi: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_interval")]
    pub record_interval: f64,
    #[serde(default = "default_state_bound")]
    pub state_bound: f64,
}

fn default_record_interval() -> f64 {
    0.1
}

fn default_state_bound() -> f64 {
    1e3
}

pub(crate) fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{what}: rows have unequal lengths")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Scenario(format!("{what}: entries must be finite")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vector(v: &[f64], len: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::Dimension(format!("{what} has length {}, expected {len}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Scenario(format!("{what}: entries must be finite")));
    }
    Ok(DVector::from_row_slice(v))
}

/// A fully checked agent, in the model's coordinates.
#[derive(Debug, Clone)]
pub struct BuiltAgent {
    pub model: AgentModel,
    pub cost: CostFunction,
    pub x0: DVector<f64>,
    pub delta0: DVector<f64>,
    pub w0: DVector<f64>,
}

/// Everything the engine needs, validated.
#[derive(Debug, Clone)]
pub struct Built {
    pub graph: Graph,
    pub agents: Vec<BuiltAgent>,
    pub observer: ObserverGains,
    pub sigma: SigmaCoeffs,
    pub mei: MeiPolicy,
    pub max_degree: f64,
    /// Index by 0-based agent; `Some` for agents with an attack profile.
    pub attacks: Vec<Option<AttackProfile>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Returns a copy without attack profiles.
    pub fn without_attacks(&self) -> Self {
        let mut s = self.clone();
        s.attacks.clear();
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Built> {
        let sim = &self.sim;
        if !(sim.dt > 0.0 && sim.dt.is_finite()) {
            return Err(Error::Scenario(format!("dt must be positive, got {}", sim.dt)));
        }
        if !(sim.horizon >= 0.0 && sim.horizon.is_finite()) {
            return Err(Error::Scenario(format!(
                "horizon must be nonnegative, got {}",
                sim.horizon
            )));
        }
        if !(sim.record_interval > 0.0) || !(sim.state_bound > 0.0) {
            return Err(Error::Scenario(
                "record_interval and state_bound must be positive".into(),
            ));
        }

        let n = self.graph.nodes;
        let graph = Graph::from_specs(n, &self.graph.edges)?;
        if self.agents.len() != n {
            return Err(Error::Scenario(format!(
                "graph has {n} nodes but {} agents are defined",
                self.agents.len()
            )));
        }

        let g = &self.gains;
        let observer = ObserverGains {
            rho: g.rho,
            alpha: g.alpha,
            beta: g.beta,
        };
        observer.validate()?;
        if !(g.eta > 0.0) || !(g.gamma_c > 0.0) {
            return Err(Error::InvalidParameter("eta and gamma_c must be positive".into()));
        }
        for (name, f) in [("gamma_delta", &g.gamma_delta), ("gamma_w", &g.gamma_w)] {
            if !f.is_absolutely_integrable() {
                return Err(Error::Scenario(format!(
                    "{name} must be absolutely integrable (use exp_decay with b > 0)"
                )));
            }
            if f.eval(0.0) <= 0.0 {
                return Err(Error::Scenario(format!("{name} must be positive")));
            }
        }

        let tr = &self.trigger;
        if !(tr.m0 > 0.0 && tr.v > 0.0 && tr.t_mei > 0.0) {
            return Err(Error::InvalidParameter("m0, v and t_mei must be positive".into()));
        }
        if !(tr.c0 >= 1.0) {
            return Err(Error::InvalidParameter(format!("c0 must be >= 1, got {}", tr.c0)));
        }

        let mut agents = Vec::with_capacity(n);
        let mut q_common = None;
        for (idx, ac) in self.agents.iter().enumerate() {
            let label = idx + 1;
            let a = matrix(&ac.a, &format!("agent {label} A"))?;
            let b = matrix(&ac.b, &format!("agent {label} B"))?;
            let c = matrix(&ac.c, &format!("agent {label} C"))?;
            let part = crate::plant::partition(&a, &b, &c)?;
            let p = b.ncols();
            let k = if ac.k.is_empty() {
                if part.n1 != 0 {
                    return Err(Error::Dimension(format!(
                        "agent {label}: K must be {p}x{}",
                        part.n1
                    )));
                }
                DMatrix::zeros(p, 0)
            } else {
                matrix(&ac.k, &format!("agent {label} K"))?
            };
            let f = ac
                .f
                .as_ref()
                .map(|f| matrix(f, &format!("agent {label} F")))
                .transpose()?;
            let model = AgentModel::from_partition(part, k, ac.mu_bar, f)?;
            let nx = a.nrows();
            let q = c.nrows();
            if *q_common.get_or_insert(q) != q {
                return Err(Error::Dimension(format!(
                    "agent {label} has {q} outputs; all agents must share one output space"
                )));
            }
            let x0_orig = vector(&ac.x0, nx, &format!("agent {label} x0"))?;
            let delta0_orig = match &ac.delta0 {
                Some(d) => vector(d, nx, &format!("agent {label} delta0"))?,
                None => x0_orig.clone(),
            };
            let w0_orig = match &ac.w0 {
                Some(w) => vector(w, nx, &format!("agent {label} w0"))?,
                None => DVector::zeros(nx),
            };
            let cost = match &ac.cost {
                Some(qc) => {
                    if !(qc.weight > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "agent {label}: cost weight must be positive"
                        )));
                    }
                    CostFunction::Quadratic {
                        center: vector(&qc.center, q, &format!("agent {label} cost center"))?,
                        weight: qc.weight,
                    }
                }
                None => CostFunction::quadratic(&c * &x0_orig),
            };
            agents.push(BuiltAgent {
                x0: model.to_model_coords(&x0_orig),
                delta0: model.to_model_coords(&delta0_orig),
                w0: model.to_model_coords(&w0_orig),
                model,
                cost,
            });
        }

        let spectral = laplacian(&graph);
        let sigma = match &tr.sigma {
            SigmaConfig::Direct { s1, s2 } => SigmaCoeffs { s1: *s1, s2: *s2 },
            SigmaConfig::Derived { lambda_m_c, phi } => {
                if spectral.max_degree <= 0.0 {
                    return Err(Error::Scenario(
                        "derived sigma needs at least one edge".into(),
                    ));
                }
                let consts = TheoremConstants::new(&TheoremInputs {
                    alpha: g.alpha,
                    beta: g.beta,
                    rho: g.rho,
                    eta_bar: g.eta,
                    gamma_c: g.gamma_c,
                    d_m: spectral.max_degree,
                    m_bar: tr.m0,
                })?;
                let lambda = match lambda_m_c {
                    Some(l) => *l,
                    None => agents
                        .iter()
                        .map(|a| a.model.c.singular_values().max())
                        .fold(0.0, f64::max),
                };
                consts.sigma_coeffs(lambda, g.alpha, phi.unwrap_or(1.1 * consts.phi_min))?
            }
        };
        sigma.validate()?;

        validate_thresholds(&self.thresholds, &g.gamma_delta, &g.gamma_w, sim.horizon)?;

        let mut attacks: Vec<Option<AttackProfile>> = vec![None; n];
        for prof in &self.attacks {
            prof.validate(n)?;
            let slot = &mut attacks[prof.agent - 1];
            if slot.is_some() {
                return Err(Error::Scenario(format!(
                    "agent {} has more than one attack profile",
                    prof.agent
                )));
            }
            prof.lift(&agents[prof.agent - 1].model.c)?;
            *slot = Some(prof.clone());
        }

        Ok(Built {
            graph,
            agents,
            observer,
            sigma,
            mei: MeiPolicy {
                configured: tr.t_mei,
                m0: tr.m0,
                c0: tr.c0,
                v: tr.v,
            },
            max_degree: spectral.max_degree,
            attacks,
        })
    }
}
