//! Receiver-side attack detection and private isolation.
//!
//! On every reception a node checks the trigger interval first (no honest
//! sender transmits inside its MEI) and then the jump between consecutive
//! received samples against time-varying thresholds. A failed check cuts
//! the edge in the receiver's own view only.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::timefn::TimeFn;

/// Slack on the interval comparison, absorbing float rounding of step times.
pub const TIC_TOLERANCE: f64 = 1e-9;

/// Grid density used when checking thresholds against trigger levels.
pub const THRESHOLD_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub f_delta: TimeFn,
    pub f_w: TimeFn,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

pub fn default_margin() -> f64 {
    1.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    IsolateTic,
    IsolateTecDelta,
    IsolateTecW,
}

impl Decision {
    pub fn is_isolate(self) -> bool {
        self != Decision::Accept
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::IsolateTic => "tic",
            Decision::IsolateTecDelta => "tec-delta",
            Decision::IsolateTecW => "tec-w",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub decision: Decision,
    pub t: f64,
    /// The quantity compared by the deciding check (the last one run when
    /// every check passes).
    pub measured: f64,
    pub threshold: f64,
}

/// What a receiver remembers about the last accepted reception on a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveRecord {
    pub last_time: f64,
    pub delta: DVector<f64>,
    pub w: DVector<f64>,
    /// MEI the sender announced for the interval that follows `last_time`.
    pub t_mei: f64,
}

/// Runs the interval check and then the two jump checks.
pub fn badi_on_receive(
    rec: &ReceiveRecord,
    t_new: f64,
    delta_new: &DVector<f64>,
    w_new: &DVector<f64>,
    c_at_last: f64,
    sched: &ThresholdSchedule,
    c_sender: &DMatrix<f64>,
) -> Verdict {
    let interval = t_new - rec.last_time;
    if interval < rec.t_mei - TIC_TOLERANCE {
        return Verdict {
            decision: Decision::IsolateTic,
            t: t_new,
            measured: interval,
            threshold: rec.t_mei,
        };
    }
    let e_delta = c_at_last * (c_sender * (&rec.delta - delta_new)).norm_squared();
    let th_delta = sched.f_delta.eval(t_new);
    if e_delta > th_delta {
        return Verdict {
            decision: Decision::IsolateTecDelta,
            t: t_new,
            measured: e_delta,
            threshold: th_delta,
        };
    }
    let e_w = (c_sender * (&rec.w - w_new)).norm_squared();
    let th_w = sched.f_w.eval(t_new);
    Verdict {
        decision: if e_w > th_w {
            Decision::IsolateTecW
        } else {
            Decision::Accept
        },
        t: t_new,
        measured: e_w,
        threshold: th_w,
    }
}

/// Fails with the first grid time where a threshold drops below
/// `margin * gamma`.
pub fn validate_thresholds(
    sched: &ThresholdSchedule,
    gamma_delta: &TimeFn,
    gamma_w: &TimeFn,
    horizon: f64,
) -> Result<()> {
    if !(sched.margin >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold margin must be >= 1, got {}",
            sched.margin
        )));
    }
    for k in 0..=THRESHOLD_GRID {
        let t = horizon * k as f64 / THRESHOLD_GRID as f64;
        if sched.f_delta.eval(t) < sched.margin * gamma_delta.eval(t) {
            return Err(Error::ThresholdViolation { which: "delta", t });
        }
        if sched.f_w.eval(t) < sched.margin * gamma_w.eval(t) {
            return Err(Error::ThresholdViolation { which: "w", t });
        }
    }
    Ok(())
}

/// Every agent's private view of its incident edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    original: Graph,
    /// `local[(i, j)]` is `a_ij` as agent `i` currently uses it.
    local: DMatrix<f64>,
}

impl Topology {
    pub fn new(g: &Graph) -> Self {
        Topology {
            original: g.clone(),
            local: g.weights().clone(),
        }
    }

    pub fn original(&self) -> &Graph {
        &self.original
    }

    pub fn weight(&self, viewer: usize, other: usize) -> f64 {
        self.local[(viewer, other)]
    }

    pub fn is_active(&self, viewer: usize, other: usize) -> bool {
        self.local[(viewer, other)] > 0.0
    }

    /// Zeroes `a_receiver,sender` in the receiver's view. Returns whether
    /// anything changed.
    pub fn isolate(&mut self, receiver: usize, sender: usize) -> Result<bool> {
        if self.original.weight(receiver, sender) <= 0.0 {
            return Err(Error::InvalidGraph(format!(
                "no edge between {receiver} and {sender}"
            )));
        }
        let changed = self.local[(receiver, sender)] > 0.0;
        self.local[(receiver, sender)] = 0.0;
        Ok(changed)
    }

    /// Agents cut off by every original neighbor.
    pub fn quarantined(&self) -> Vec<usize> {
        let n = self.original.node_count();
        (0..n)
            .filter(|&b| {
                let nbrs = self.original.neighbors(b);
                !nbrs.is_empty() && nbrs.iter().all(|&j| self.local[(j, b)] == 0.0)
            })
            .collect()
    }

    /// Number of agents not yet quarantined.
    pub fn active_count(&self) -> usize {
        self.original.node_count() - self.quarantined().len()
    }
}
