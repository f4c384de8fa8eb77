//! Fixed-step simulation of the full protocol.
//!
//! Each step integrates every agent's plant and observer with RK4 while
//! the exchanged samples stay frozen, advances the activation variables
//! exactly, and then walks the directed channels in sorted order to fire
//! triggers and run the receiver-side checks.

pub mod metrics;
pub mod scenario;
pub mod trace;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attack::{next_malicious_trigger, tampered_sample, AttackProfile, TriggerTamper};
use crate::detect::{badi_on_receive, Decision, ReceiveRecord, ThresholdSchedule, Topology};
use crate::error::{Error, Result};
use crate::observer::{rates_with_coupling, Coupling, CostFunction, EdgeSample, ObserverGains, SampledOutputs};
use crate::plant::AgentModel;
use crate::timefn::TimeFn;
use crate::trigger::{activation_step, etc_values, t_mei_for, EtcInput, MeiPolicy, SigmaCoeffs, TriggerClause};

pub use metrics::Metrics;
pub use scenario::Scenario;
pub use trace::{Event, EventKind, SimulationTrace};

/// Receiver-side bookkeeping for one neighbor.
#[derive(Debug, Clone)]
struct EdgeLocal {
    c: f64,
    c_hat: f64,
    sample: SampledOutputs,
    /// Last accepted reception, in the sender's coordinates.
    recv: Option<ReceiveRecord>,
    /// Own `c` at the last accepted reception; weights the delta jump check.
    recv_c: f64,
}

#[derive(Debug, Clone)]
struct AgentState {
    model: AgentModel,
    cost: CostFunction,
    x: DVector<f64>,
    delta: DVector<f64>,
    w: DVector<f64>,
    profile: Option<AttackProfile>,
    lift: Option<DMatrix<f64>>,
    edges: BTreeMap<usize, EdgeLocal>,
}

/// First violation times of each check on a channel, whether or not the
/// receiver acted on them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CheckHistory {
    pub first_tic: Option<f64>,
    pub first_tec: Option<f64>,
}

#[derive(Debug, Clone)]
struct Channel {
    sender: usize,
    receiver: usize,
    delta_hat: DVector<f64>,
    w_hat: DVector<f64>,
    c_hat: f64,
    sigma: (f64, f64),
    m: f64,
    min_m: f64,
    last_step: u64,
    mei_steps: u64,
    t_mei: f64,
    count: u64,
    min_gap_steps: Option<u64>,
    severed: bool,
    /// Severed but still evaluated so that later check violations of a
    /// Byzantine sender are recorded.
    shadow: bool,
    shadow_rec: Option<(ReceiveRecord, f64)>,
    forced_step: Option<u64>,
    rng: ChaCha8Rng,
    checks: CheckHistory,
}

impl Channel {
    fn live(&self) -> bool {
        !self.severed || self.shadow
    }
}

/// Mutable simulation state.
pub struct World {
    name: String,
    seed: u64,
    dt: f64,
    horizon: f64,
    total_steps: u64,
    record_every: u64,
    state_bound: f64,
    gains: ObserverGains,
    eta: f64,
    gamma_delta: TimeFn,
    gamma_w: TimeFn,
    gamma_c: f64,
    thresholds: ThresholdSchedule,
    sigma: SigmaCoeffs,
    mei: MeiPolicy,
    agents: Vec<AgentState>,
    channels: Vec<Channel>,
    channel_of: BTreeMap<(usize, usize), usize>,
    topology: Topology,
    step: u64,
    trace: SimulationTrace,
    max_state_norm: f64,
    mei_clamps: usize,
}

fn steps_for(duration: f64, dt: f64) -> u64 {
    (duration / dt - 1e-9).ceil().max(0.0) as u64
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let built = scenario.build()?;
        let n = built.graph.node_count();
        let dt = scenario.sim.dt;
        let c0 = scenario.trigger.c0;

        let mut agents = Vec::with_capacity(n);
        for (i, a) in built.agents.into_iter().enumerate() {
            let lift = match &built.attacks[i] {
                Some(p) => Some(p.lift(&a.model.c)?),
                None => None,
            };
            let q = a.model.output_dim();
            let edges = built
                .graph
                .neighbors(i)
                .into_iter()
                .map(|j| {
                    (
                        j,
                        EdgeLocal {
                            c: c0,
                            c_hat: c0,
                            sample: SampledOutputs {
                                own_delta: DVector::zeros(q),
                                their_delta: DVector::zeros(q),
                                own_w: DVector::zeros(q),
                                their_w: DVector::zeros(q),
                            },
                            recv: None,
                            recv_c: c0,
                        },
                    )
                })
                .collect();
            agents.push(AgentState {
                x: a.x0,
                delta: a.delta0,
                w: a.w0,
                cost: a.cost,
                profile: built.attacks[i].clone(),
                lift,
                model: a.model,
                edges,
            });
        }

        let mut channels = Vec::new();
        let mut channel_of = BTreeMap::new();
        for s in 0..n {
            for r in built.graph.neighbors(s) {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.sim.seed);
                rng.set_stream((s * n + r) as u64);
                channel_of.insert((s, r), channels.len());
                let nx = agents[s].model.state_dim();
                channels.push(Channel {
                    sender: s,
                    receiver: r,
                    delta_hat: DVector::zeros(nx),
                    w_hat: DVector::zeros(nx),
                    c_hat: c0,
                    sigma: built.sigma.at(c0),
                    m: built.mei.m0 / c0,
                    min_m: f64::INFINITY,
                    last_step: 0,
                    mei_steps: 0,
                    t_mei: 0.0,
                    count: 0,
                    min_gap_steps: None,
                    severed: false,
                    shadow: false,
                    shadow_rec: None,
                    forced_step: None,
                    rng,
                    checks: CheckHistory::default(),
                });
            }
        }

        let record_every = ((scenario.sim.record_interval / dt).round() as u64).max(1);
        let mut world = World {
            name: scenario.name.clone(),
            seed: scenario.sim.seed,
            dt,
            horizon: scenario.sim.horizon,
            total_steps: steps_for(scenario.sim.horizon, dt),
            record_every,
            state_bound: scenario.sim.state_bound,
            gains: built.observer,
            eta: scenario.gains.eta,
            gamma_delta: scenario.gains.gamma_delta.clone(),
            gamma_w: scenario.gains.gamma_w.clone(),
            gamma_c: scenario.gains.gamma_c,
            thresholds: scenario.thresholds.clone(),
            sigma: built.sigma,
            mei: built.mei,
            agents,
            channels,
            channel_of,
            topology: Topology::new(&built.graph),
            step: 0,
            trace: SimulationTrace {
                dt,
                ..Default::default()
            },
            max_state_norm: 0.0,
            mei_clamps: 0,
        };
        for idx in 0..world.channels.len() {
            world.fire(idx, TriggerClause::Seed)?;
        }
        world.check_state()?;
        world.record();
        Ok(world)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn trace(&self) -> &SimulationTrace {
        &self.trace
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Labels (0-based) of agents without an attack profile.
    pub fn normal_agents(&self) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|&i| self.agents[i].profile.is_none())
            .collect()
    }

    pub fn output(&self, i: usize) -> DVector<f64> {
        &self.agents[i].model.c * &self.agents[i].x
    }

    pub fn observer_output(&self, i: usize) -> DVector<f64> {
        &self.agents[i].model.c * &self.agents[i].delta
    }

    pub fn tracking_error(&self, i: usize) -> crate::plant::TrackingError {
        let a = &self.agents[i];
        a.model.tracking_error(&a.x, &a.delta)
    }

    pub fn w_sum(&self) -> DVector<f64> {
        let n = self.agents[0].w.len();
        self.agents.iter().fold(DVector::zeros(n), |acc, a| {
            if a.w.len() == n {
                acc + &a.w
            } else {
                acc
            }
        })
    }

    /// Local weight `c_ij` held by agent `i`.
    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        self.agents[i].edges.get(&j).map(|e| e.c)
    }

    pub fn activation(&self, sender: usize, receiver: usize) -> Option<f64> {
        self.channel_of
            .get(&(sender, receiver))
            .map(|&k| self.channels[k].m)
    }

    pub fn is_severed(&self, sender: usize, receiver: usize) -> Option<bool> {
        self.channel_of
            .get(&(sender, receiver))
            .map(|&k| self.channels[k].severed)
    }

    fn coupling(&self, i: usize) -> Result<Coupling> {
        let a = &self.agents[i];
        let samples: Vec<EdgeSample<'_>> = a
            .edges
            .iter()
            .map(|(&j, e)| EdgeSample {
                neighbor: j,
                weight: self.topology.weight(i, j),
                c_hat: e.c_hat,
                sample: Some(&e.sample),
            })
            .collect();
        Coupling::compute(i, a.model.output_dim(), &samples)
    }

    /// Advances one step of length `dt`.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let couplings = (0..self.agents.len())
            .map(|i| self.coupling(i))
            .collect::<Result<Vec<_>>>()?;
        for (i, coupling) in couplings.iter().enumerate() {
            self.integrate_agent(i, coupling)?;
        }
        for i in 0..self.agents.len() {
            let eta = self.eta;
            let topo = &self.topology;
            for (&j, e) in self.agents[i].edges.iter_mut() {
                if topo.is_active(i, j) {
                    e.c += dt * eta * (&e.sample.own_delta - &e.sample.their_delta).norm_squared();
                }
            }
        }
        let start = self.step;
        self.step += 1;
        let t = self.time();

        for ch in self.channels.iter_mut().filter(|c| c.live()) {
            let active = start - ch.last_step < ch.mei_steps;
            ch.m = activation_step(ch.m, active, dt, ch.sigma.0, ch.sigma.1)?;
            ch.min_m = ch.min_m.min(ch.m);
        }
        self.check_state()?;

        for idx in 0..self.channels.len() {
            if !self.channels[idx].live() {
                continue;
            }
            if let Some(clause) = self.should_fire(idx, t) {
                self.fire(idx, clause)?;
            }
        }
        if self.step % self.record_every == 0 || self.step == self.total_steps {
            self.record();
        }
        Ok(())
    }

    fn integrate_agent(&mut self, i: usize, coupling: &Coupling) -> Result<()> {
        let dt = self.dt;
        let gains = self.gains;
        let a = &self.agents[i];
        let model = &a.model;
        let cost = &a.cost;
        let deriv = |x: &DVector<f64>, delta: &DVector<f64>| -> Result<_> {
            let (dd, dw) = rates_with_coupling(&model.c, cost, &gains, delta, coupling);
            let u = model.controller(x, delta, &dd)?;
            let dx = &model.a * x + &model.b * u;
            Ok((dx, dd, dw))
        };
        let (x0, d0, w0) = (&a.x, &a.delta, &a.w);
        let (k1x, k1d, k1w) = deriv(x0, d0)?;
        let (k2x, k2d, k2w) = deriv(&(x0 + &k1x * (dt / 2.0)), &(d0 + &k1d * (dt / 2.0)))?;
        let (k3x, k3d, k3w) = deriv(&(x0 + &k2x * (dt / 2.0)), &(d0 + &k2d * (dt / 2.0)))?;
        let (k4x, k4d, k4w) = deriv(&(x0 + &k3x * dt), &(d0 + &k3d * dt))?;
        let h = dt / 6.0;
        let x = x0 + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * h;
        let delta = d0 + (k1d + k2d * 2.0 + k3d * 2.0 + k4d) * h;
        let w = w0 + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * h;
        let a = &mut self.agents[i];
        a.x = x;
        a.delta = delta;
        a.w = w;
        Ok(())
    }

    fn check_state(&mut self) -> Result<()> {
        let t = self.time();
        for (i, a) in self.agents.iter().enumerate() {
            for (name, v) in [("x", &a.x), ("delta", &a.delta), ("w", &a.w)] {
                let norm = v.norm();
                if !norm.is_finite() {
                    return Err(Error::NumericalAbort {
                        t,
                        reason: format!("agent {} {name} is not finite", i + 1),
                    });
                }
                if norm > self.state_bound {
                    return Err(Error::NumericalAbort {
                        t,
                        reason: format!(
                            "agent {} |{name}| = {norm:e} exceeds the bound {:e}",
                            i + 1,
                            self.state_bound
                        ),
                    });
                }
                self.max_state_norm = self.max_state_norm.max(norm);
            }
        }
        Ok(())
    }

    fn should_fire(&mut self, idx: usize, t: f64) -> Option<TriggerClause> {
        let step = self.step;
        let dt = self.dt;
        let ch = &self.channels[idx];
        let sender = &self.agents[ch.sender];
        let tamper = sender
            .profile
            .as_ref()
            .map(|p| &p.trigger_tamper)
            .filter(|tp| tp.is_active(t));
        if let Some(tamper) = tamper {
            let tamper = tamper.clone();
            let ch = &mut self.channels[idx];
            let forced = match ch.forced_step {
                Some(s) => s,
                None => {
                    let last = ch.last_step as f64 * dt;
                    let max_gap = match tamper {
                        TriggerTamper::UniformRandom { max_gap, .. } => max_gap,
                        TriggerTamper::None => unreachable!("inactive tamper filtered above"),
                    };
                    let at = next_malicious_trigger(&tamper, last, last + max_gap, &mut ch.rng);
                    let s = steps_for(at, dt).max(step);
                    ch.forced_step = Some(s);
                    s
                }
            };
            return (step >= forced).then_some(TriggerClause::AttackForced);
        }
        self.channels[idx].forced_step = None;
        let ch = &self.channels[idx];
        if step - ch.last_step < ch.mei_steps {
            return None;
        }
        let c_now = sender.edges[&ch.receiver].c;
        etc_values(&EtcInput {
            c: &sender.model.c,
            delta_hat: &ch.delta_hat,
            w_hat: &ch.w_hat,
            c_hat: ch.c_hat,
            delta_now: &sender.delta,
            w_now: &sender.w,
            c_now,
            gamma_delta: self.gamma_delta.eval(t),
            gamma_w: self.gamma_w.eval(t),
            gamma_c: self.gamma_c,
        })
        .fired()
    }

    /// Transmits on channel `idx` at the current step.
    fn fire(&mut self, idx: usize, clause: TriggerClause) -> Result<()> {
        let step = self.step;
        let t = self.time();
        let dt = self.dt;
        let (s, r) = (self.channels[idx].sender, self.channels[idx].receiver);
        let shadow = self.channels[idx].severed;

        let sender = &self.agents[s];
        let (sent_delta, sent_w) = match (&sender.profile, &sender.lift) {
            (Some(p), Some(lift)) => tampered_sample(p, lift, r + 1, t, &sender.delta, &sender.w),
            _ => (sender.delta.clone(), sender.w.clone()),
        };
        let true_delta = sender.delta.clone();
        let true_w = sender.w.clone();
        let c_sender = sender.edges[&r].c;
        let cs = sender.model.c.clone();

        let decision = t_mei_for(c_sender, &self.sigma, &self.mei)?;
        let mut mei_steps = steps_for(decision.t_mei, dt);
        if mei_steps as f64 * dt > decision.t_hat0 {
            mei_steps = (decision.t_hat0 / dt).floor() as u64;
        }
        let mei_steps = mei_steps.max(1);
        {
            let ch = &mut self.channels[idx];
            if clause != TriggerClause::Seed {
                let gap = step - ch.last_step;
                ch.min_gap_steps = Some(ch.min_gap_steps.map_or(gap, |g| g.min(gap)));
                ch.count += 1;
            }
            ch.delta_hat = true_delta.clone();
            ch.w_hat = true_w.clone();
            ch.c_hat = c_sender;
            ch.sigma = self.sigma.at(c_sender);
            ch.m = decision.m_reset;
            ch.last_step = step;
            ch.mei_steps = mei_steps;
            ch.t_mei = mei_steps as f64 * dt;
            ch.forced_step = None;
        }
        let t_mei = self.channels[idx].t_mei;

        if shadow {
            self.shadow_receive(idx, t, &sent_delta, &sent_w, &cs);
            return Ok(());
        }

        if decision.clamped {
            self.mei_clamps += 1;
            self.trace.events.push(Event {
                step,
                t,
                kind: EventKind::MeiClamp,
                sender: s + 1,
                receiver: r + 1,
                clause: clause.to_string(),
                value: decision.t_hat0,
                threshold: self.mei.configured,
            });
        }

        {
            let e = self.agents[s].edges.get_mut(&r).expect("channel implies edge");
            e.sample.own_delta = &cs * &true_delta;
            e.sample.own_w = &cs * &true_w;
            e.c_hat = c_sender;
        }

        let th_delta = self.thresholds.f_delta.eval(t);
        let (rec, recv_c) = {
            let e = &self.agents[r].edges[&s];
            (e.recv.clone(), e.recv_c)
        };
        let (verdict, jump) = match &rec {
            None => (None, 0.0),
            Some(rec) => {
                let v = badi_on_receive(rec, t, &sent_delta, &sent_w, recv_c, &self.thresholds, &cs);
                let jump = recv_c * (&cs * (&rec.delta - &sent_delta)).norm_squared();
                self.note_checks(idx, rec, t, &sent_delta, &sent_w, recv_c, &cs);
                (Some(v), jump)
            }
        };
        self.trace.events.push(Event {
            step,
            t,
            kind: EventKind::Trigger,
            sender: s + 1,
            receiver: r + 1,
            clause: clause.to_string(),
            value: jump,
            threshold: th_delta,
        });

        match verdict {
            Some(v) if v.decision.is_isolate() => {
                for kind in [EventKind::Detection, EventKind::Isolation] {
                    self.trace.events.push(Event {
                        step,
                        t,
                        kind,
                        sender: s + 1,
                        receiver: r + 1,
                        clause: v.decision.to_string(),
                        value: v.measured,
                        threshold: v.threshold,
                    });
                }
                self.topology.isolate(r, s)?;
                let record = ReceiveRecord {
                    last_time: t,
                    delta: sent_delta,
                    w: sent_w,
                    t_mei,
                };
                let byzantine = self.agents[s].profile.is_some();
                let ch = &mut self.channels[idx];
                ch.severed = true;
                ch.shadow = byzantine;
                ch.shadow_rec = Some((record, recv_c));
                if let Some(&back) = self.channel_of.get(&(r, s)) {
                    self.channels[back].severed = true;
                }
            }
            _ => {
                let e = self.agents[r].edges.get_mut(&s).expect("channel implies edge");
                e.sample.their_delta = &cs * &sent_delta;
                e.sample.their_w = &cs * &sent_w;
                e.c_hat = e.c;
                e.recv_c = e.c;
                e.recv = Some(ReceiveRecord {
                    last_time: t,
                    delta: sent_delta,
                    w: sent_w,
                    t_mei,
                });
            }
        }
        Ok(())
    }

    /// Records which checks a reception would fail, independently of the
    /// order in which the receiver applies them.
    #[allow(clippy::too_many_arguments)]
    fn note_checks(
        &mut self,
        idx: usize,
        rec: &ReceiveRecord,
        t: f64,
        delta: &DVector<f64>,
        w: &DVector<f64>,
        c_at_last: f64,
        cs: &DMatrix<f64>,
    ) {
        let tic_fail = t - rec.last_time < rec.t_mei - crate::detect::TIC_TOLERANCE;
        let no_tic = ReceiveRecord {
            t_mei: 0.0,
            ..rec.clone()
        };
        let tec_fail = badi_on_receive(&no_tic, t, delta, w, c_at_last, &self.thresholds, cs)
            .decision
            != Decision::Accept;
        let h = &mut self.channels[idx].checks;
        if tic_fail && h.first_tic.is_none() {
            h.first_tic = Some(t);
        }
        if tec_fail && h.first_tec.is_none() {
            h.first_tec = Some(t);
        }
    }

    fn shadow_receive(&mut self, idx: usize, t: f64, delta: &DVector<f64>, w: &DVector<f64>, cs: &DMatrix<f64>) {
        let Some((rec, c)) = self.channels[idx].shadow_rec.clone() else {
            return;
        };
        self.note_checks(idx, &rec, t, delta, w, c, cs);
        let t_mei = self.channels[idx].t_mei;
        self.channels[idx].shadow_rec = Some((
            ReceiveRecord {
                last_time: t,
                delta: delta.clone(),
                w: w.clone(),
                t_mei,
            },
            c,
        ));
    }

    fn record(&mut self) {
        let t = self.time();
        for (i, a) in self.agents.iter().enumerate() {
            self.trace.states.push(trace::StateRow {
                t,
                agent: i + 1,
                x: a.x.iter().copied().collect(),
                y: (&a.model.c * &a.x).iter().copied().collect(),
                delta: a.delta.iter().copied().collect(),
                w: a.w.iter().copied().collect(),
            });
        }
        for ch in &self.channels {
            self.trace.edges.push(trace::EdgeRow {
                t,
                sender: ch.sender + 1,
                receiver: ch.receiver + 1,
                c_hat: ch.c_hat,
                m: ch.m,
            });
        }
        let res = self.residual();
        self.trace.metrics.push(trace::MetricRow {
            t,
            consensus_norm: res.consensus_norm,
            kkt_norm: res.kkt_norm,
        });
    }

    /// Optimality residual over the agents without an attack profile.
    pub fn residual(&self) -> crate::observer::Residual {
        let normal = self.normal_agents();
        let outputs: Vec<_> = normal.iter().map(|&i| self.observer_output(i)).collect();
        let costs: Vec<_> = normal.iter().map(|&i| &self.agents[i].cost).collect();
        crate::observer::optimality_residual(&outputs, &costs)
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> RunOutput {
        let metrics = metrics::summarize(&self);
        RunOutput {
            trace: self.trace,
            metrics,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: SimulationTrace,
    pub metrics: Metrics,
}

impl RunOutput {
    /// Writes `states.csv`, `edges.csv`, `events.csv` and `metrics.json`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        use std::fs::File;
        use std::io::BufWriter;
        std::fs::create_dir_all(dir)?;
        self.trace
            .write_states_csv(BufWriter::new(File::create(dir.join("states.csv"))?))?;
        self.trace
            .write_edges_csv(BufWriter::new(File::create(dir.join("edges.csv"))?))?;
        self.trace
            .write_events_csv(BufWriter::new(File::create(dir.join("events.csv"))?))?;
        let mut json = serde_json::to_string_pretty(&self.metrics)?;
        json.push('\n');
        std::fs::write(dir.join("metrics.json"), json)?;
        Ok(())
    }
}

/// Runs a scenario over its full horizon.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let mut world = World::new(scenario)?;
    world.run_to_end()?;
    Ok(world.finish())
}
