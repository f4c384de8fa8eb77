//! Byzantine behavior: additive deviations on transmitted samples and
//! tampering with the transmission schedule.
//!
//! Deviations are written in output space and lifted into the sender's
//! state space when applied. The attacker's own state is never touched.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coef * j^power`, where `j` is the receiving neighbor's 1-based label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexExpr {
    pub coef: f64,
    #[serde(default)]
    pub power: f64,
}

impl IndexExpr {
    pub fn eval(&self, j: usize) -> f64 {
        if self.power == 0.0 {
            self.coef
        } else {
            self.coef * (j as f64).powf(self.power)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wave {
    Sin,
    Cos,
}

/// `amp(j) * wave(freq(j) * t) * (1, ..., 1)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub amp: IndexExpr,
    pub freq: IndexExpr,
    pub wave: Wave,
}

impl Signal {
    pub fn scalar(&self, j: usize, t: f64) -> f64 {
        let arg = self.freq.eval(j) * t;
        let g = match self.wave {
            Wave::Sin => arg.sin(),
            Wave::Cos => arg.cos(),
        };
        self.amp.eval(j) * g
    }
}

/// Deviations active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPhase {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub delta: Option<Signal>,
    #[serde(default)]
    pub w: Option<Signal>,
}

impl AttackPhase {
    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerTamper {
    #[default]
    None,
    /// Ignore the trigger rule on `[start, end)` and transmit at times
    /// drawn uniformly between `min_gap` and `max_gap` after the previous
    /// transmission.
    UniformRandom {
        min_gap: f64,
        max_gap: f64,
        start: f64,
        end: f64,
    },
}

impl TriggerTamper {
    pub fn is_active(&self, t: f64) -> bool {
        match self {
            TriggerTamper::None => false,
            TriggerTamper::UniformRandom { start, end, .. } => t >= *start && t < *end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackProfile {
    /// 1-based label of the Byzantine agent.
    pub agent: usize,
    #[serde(default)]
    pub phases: Vec<AttackPhase>,
    #[serde(default)]
    pub trigger_tamper: TriggerTamper,
    /// Optional `n x q` map lifting output deviations into state space;
    /// row-major. Defaults to the pseudo-inverse of the agent's `C`.
    #[serde(default)]
    pub injection: Option<Vec<Vec<f64>>>,
}

impl AttackProfile {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        if self.agent == 0 || self.agent > node_count {
            return Err(Error::Scenario(format!(
                "attack profile names agent {} outside 1..={node_count}",
                self.agent
            )));
        }
        for p in &self.phases {
            if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
                return Err(Error::Scenario(format!(
                    "attack phase [{}, {}) is empty or not finite",
                    p.start, p.end
                )));
            }
        }
        if let TriggerTamper::UniformRandom {
            min_gap,
            max_gap,
            start,
            end,
        } = self.trigger_tamper
        {
            if !(min_gap > 0.0 && max_gap >= min_gap && start < end) {
                return Err(Error::Scenario(format!(
                    "trigger tamper needs 0 < min_gap <= max_gap and start < end, got \
                     min_gap = {min_gap}, max_gap = {max_gap}, window [{start}, {end})"
                )));
            }
        }
        Ok(())
    }

    /// Whether any deviation or tampering is in force at `t`.
    pub fn is_active(&self, t: f64) -> bool {
        self.phases.iter().any(|p| p.contains(t)) || self.trigger_tamper.is_active(t)
    }

    /// Output-space deviations `(C eps_delta, C eps_w)` toward neighbor `j`
    /// (1-based) at time `t`.
    pub fn output_deviation(&self, j: usize, t: f64, q: usize) -> (DVector<f64>, DVector<f64>) {
        let mut d = 0.0;
        let mut w = 0.0;
        for p in self.phases.iter().filter(|p| p.contains(t)) {
            if let Some(s) = &p.delta {
                d += s.scalar(j, t);
            }
            if let Some(s) = &p.w {
                w += s.scalar(j, t);
            }
        }
        (DVector::from_element(q, d), DVector::from_element(q, w))
    }

    /// Injection map for a sender with output matrix `c`.
    pub fn lift(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (q, n) = c.shape();
        match &self.injection {
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != q) {
                    return Err(Error::Dimension(format!(
                        "injection map for agent {} must be {n}x{q}",
                        self.agent
                    )));
                }
                Ok(DMatrix::from_fn(n, q, |r, k| rows[r][k]))
            }
            None => c
                .clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::Dimension(e.to_string())),
        }
    }
}

/// Sample actually put on the wire toward neighbor `j` (1-based).
pub fn tampered_sample(
    profile: &AttackProfile,
    lift: &DMatrix<f64>,
    j: usize,
    t: f64,
    true_delta: &DVector<f64>,
    true_w: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    if !profile.phases.iter().any(|p| p.contains(t)) {
        return (true_delta.clone(), true_w.clone());
    }
    let (dd, dw) = profile.output_deviation(j, t, lift.ncols());
    (true_delta + lift * dd, true_w + lift * dw)
}

/// Next transmission time of a tampering channel whose previous
/// transmission was at `t_now`.
///
/// Draws uniformly on `[t_now + min_gap, honest_next]`; with no tampering
/// the honest time is returned unchanged.
pub fn next_malicious_trigger<R: Rng + ?Sized>(
    tamper: &TriggerTamper,
    t_now: f64,
    honest_next: f64,
    rng: &mut R,
) -> f64 {
    match tamper {
        TriggerTamper::None => honest_next,
        TriggerTamper::UniformRandom { min_gap, .. } => {
            let lo = t_now + min_gap;
            if honest_next <= lo {
                lo
            } else {
                rng.gen_range(lo..=honest_next)
            }
        }
    }
}
