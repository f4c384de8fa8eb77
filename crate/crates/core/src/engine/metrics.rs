//! End-of-run summary figures. Agent labels are 1-based.

use nalgebra::DVector;
use serde::Serialize;

use super::trace::EventKind;
use super::World;
use crate::attack::TriggerTamper;
use crate::observer::CostFunction;

#[derive(Debug, Clone, Serialize)]
pub struct AgentError {
    pub agent: usize,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSummary {
    pub sender: usize,
    pub receiver: usize,
    pub honest: bool,
    pub triggers: u64,
    pub min_gap: Option<f64>,
    pub min_activation: f64,
    pub severed: bool,
    pub final_c_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsolationSummary {
    pub receiver: usize,
    pub sender: usize,
    pub t: f64,
    pub clause: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ByzantineSummary {
    pub agent: usize,
    /// Start of the earliest deviation or tampering window.
    pub onset: f64,
    pub first_detection: Option<f64>,
    pub first_detection_clause: Option<String>,
    /// When the last original neighbor cut the agent off.
    pub fully_isolated_at: Option<f64>,
    pub latency: Option<f64>,
    /// Earliest reception failing the interval check, acted on or not.
    pub first_tic_violation: Option<f64>,
    /// Earliest reception failing a jump check, acted on or not.
    pub first_tec_violation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub steps: u64,
    pub terminal_consensus_norm: f64,
    pub terminal_kkt_norm: f64,
    /// Minimizer of the normal agents' summed quadratic costs.
    pub optimum: Option<Vec<f64>>,
    /// `|y_i(T) - optimum|` for each normal agent.
    pub output_errors: Vec<AgentError>,
    pub channels: Vec<ChannelSummary>,
    pub min_honest_gap: Option<f64>,
    pub min_activation: f64,
    pub isolations: Vec<IsolationSummary>,
    pub byzantine: Vec<ByzantineSummary>,
    pub quarantined: Vec<usize>,
    pub mei_clamps: usize,
    pub max_state_norm: f64,
    /// Largest change of `c_hat` over the final 10 s among channels
    /// joining two normal agents that are still connected.
    pub c_hat_tail_variation: Option<f64>,
}

/// Weighted mean of quadratic centers, if every cost is quadratic.
pub fn quadratic_optimum<'a>(costs: impl IntoIterator<Item = &'a CostFunction>) -> Option<DVector<f64>> {
    let mut num: Option<DVector<f64>> = None;
    let mut den = 0.0;
    for c in costs {
        match c {
            CostFunction::Quadratic { center, weight } => {
                num = Some(match num {
                    Some(acc) => acc + center * *weight,
                    None => center * *weight,
                });
                den += weight;
            }
            CostFunction::Custom(_) => return None,
        }
    }
    num.map(|v| v / den)
}

pub(super) fn summarize(world: &World) -> Metrics {
    let trace = &world.trace;
    let normal = world.normal_agents();
    let residual = world.residual();
    let optimum = quadratic_optimum(normal.iter().map(|&i| &world.agents[i].cost));
    let output_errors = match &optimum {
        Some(opt) => normal
            .iter()
            .map(|&i| AgentError {
                agent: i + 1,
                error: (world.output(i) - opt).norm(),
            })
            .collect(),
        None => Vec::new(),
    };

    let channels: Vec<ChannelSummary> = world
        .channels
        .iter()
        .map(|ch| ChannelSummary {
            sender: ch.sender + 1,
            receiver: ch.receiver + 1,
            honest: world.agents[ch.sender].profile.is_none(),
            triggers: ch.count,
            min_gap: ch.min_gap_steps.map(|g| g as f64 * world.dt),
            min_activation: ch.min_m,
            severed: ch.severed,
            final_c_hat: ch.c_hat,
        })
        .collect();
    let min_honest_gap = channels
        .iter()
        .filter(|c| c.honest)
        .filter_map(|c| c.min_gap)
        .reduce(f64::min);
    let min_activation = channels
        .iter()
        .map(|c| c.min_activation)
        .fold(f64::INFINITY, f64::min);

    let isolations: Vec<IsolationSummary> = trace
        .events_of(EventKind::Isolation)
        .map(|e| IsolationSummary {
            receiver: e.receiver,
            sender: e.sender,
            t: e.t,
            clause: e.clause.clone(),
        })
        .collect();

    let byzantine = world
        .agents
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.profile.as_ref().map(|p| (i, p)))
        .map(|(i, p)| {
            let mut onset = p.phases.iter().map(|ph| ph.start).fold(f64::INFINITY, f64::min);
            if let TriggerTamper::UniformRandom { start, .. } = p.trigger_tamper {
                onset = onset.min(start);
            }
            let label = i + 1;
            let mine: Vec<&IsolationSummary> = isolations.iter().filter(|s| s.sender == label).collect();
            let first = mine.first();
            let neighbors = world.topology.original().neighbors(i);
            let fully = if !neighbors.is_empty() && neighbors.iter().all(|&j| !world.topology.is_active(j, i)) {
                mine.iter().map(|s| s.t).reduce(f64::max)
            } else {
                None
            };
            let checks = world
                .channels
                .iter()
                .filter(|c| c.sender == i)
                .map(|c| c.checks);
            let earliest = |v: Vec<Option<f64>>| v.into_iter().flatten().reduce(f64::min);
            let (tics, tecs): (Vec<_>, Vec<_>) = checks.map(|h| (h.first_tic, h.first_tec)).unzip();
            ByzantineSummary {
                agent: label,
                onset,
                first_detection: first.map(|s| s.t),
                first_detection_clause: first.map(|s| s.clause.clone()),
                fully_isolated_at: fully,
                latency: fully.map(|t| t - onset),
                first_tic_violation: earliest(tics),
                first_tec_violation: earliest(tecs),
            }
        })
        .collect();

    let c_hat_tail_variation = tail_variation(world, 10.0);

    Metrics {
        scenario: world.name.clone(),
        seed: world.seed,
        dt: world.dt,
        horizon: world.horizon,
        steps: world.step,
        terminal_consensus_norm: residual.consensus_norm,
        terminal_kkt_norm: residual.kkt_norm,
        optimum: optimum.map(|v| v.iter().copied().collect()),
        output_errors,
        channels,
        min_honest_gap,
        min_activation,
        isolations,
        byzantine,
        quarantined: world.topology.quarantined().into_iter().map(|i| i + 1).collect(),
        mei_clamps: world.mei_clamps,
        max_state_norm: world.max_state_norm,
        c_hat_tail_variation,
    }
}

fn tail_variation(world: &World, window: f64) -> Option<f64> {
    let end = world.time();
    if end < window {
        return None;
    }
    let from = end - window - 1e-9;
    let mut worst: Option<f64> = None;
    for ch in &world.channels {
        let normal = world.agents[ch.sender].profile.is_none() && world.agents[ch.receiver].profile.is_none();
        if !normal || ch.severed {
            continue;
        }
        let (s, r) = (ch.sender + 1, ch.receiver + 1);
        let mut rows = world
            .trace
            .edges
            .iter()
            .filter(|e| e.sender == s && e.receiver == r && e.t >= from);
        let Some(first) = rows.next() else { continue };
        let last = rows.next_back().unwrap_or(first);
        let var = (last.c_hat - first.c_hat).abs();
        worst = Some(worst.map_or(var, |w: f64| w.max(var)));
    }
    worst
}
