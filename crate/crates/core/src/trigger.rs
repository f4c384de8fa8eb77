//! Self-triggered transmission: activation variables, minimal inter-event
//! times and the hybrid event-trigger condition.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Why a channel transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerClause {
    /// Initial exchange at `t = 0`.
    Seed,
    F1,
    F2,
    F3,
    AttackForced,
}

impl fmt::Display for TriggerClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriggerClause::Seed => "seed",
            TriggerClause::F1 => "f1",
            TriggerClause::F2 => "f2",
            TriggerClause::F3 => "f3",
            TriggerClause::AttackForced => "attack-forced",
        })
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Conservative lower bound on the zero crossing of `m' = -(s1 m + s2)`
/// started from `m_plus`.
pub fn t0(sigma1: f64, sigma2: f64, m_plus: f64) -> Result<f64> {
    require_positive("sigma1", sigma1)?;
    require_positive("sigma2", sigma2)?;
    require_positive("m_plus", m_plus)?;
    let root = (1.0 + 4.0 * sigma1 * m_plus / sigma2).sqrt();
    Ok((0.5 + 0.5 * root).ln() / sigma1)
}

/// Exact time at which `m' = -(s1 m + s2)` reaches zero from `m`.
pub fn zero_crossing(sigma1: f64, sigma2: f64, m: f64) -> Result<f64> {
    require_positive("sigma1", sigma1)?;
    require_positive("sigma2", sigma2)?;
    require_positive("m", m)?;
    Ok((sigma1 * m / sigma2).ln_1p() / sigma1)
}

/// Upper edge of the half-open band `[c0 + v(q-1), c0 + vq)` holding
/// `c_hat`. Always strictly greater than `c_hat`.
pub fn kappa(c_hat: f64, c0: f64, v: f64) -> f64 {
    debug_assert!(v > 0.0);
    let mut q = (((c_hat - c0) / v).floor() + 1.0).max(1.0);
    while c0 + v * q <= c_hat {
        q += 1.0;
    }
    while q > 1.0 && c_hat < c0 + v * (q - 1.0) {
        q -= 1.0;
    }
    c0 + v * q
}

/// `sigma1 = s1 * x`, `sigma2 = s2 * x` where `x` is the channel's `c_hat`
/// (or its band edge `kappa`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCoeffs {
    pub s1: f64,
    pub s2: f64,
}

impl SigmaCoeffs {
    pub fn at(&self, x: f64) -> (f64, f64) {
        (self.s1 * x, self.s2 * x)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma1 coefficient", self.s1)?;
        require_positive("sigma2 coefficient", self.s2)
    }
}

/// Constants of the convergence theorem that size the activation decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b_m: f64,
    /// Strict lower bound on `phi`.
    pub phi_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub eta_bar: f64,
    pub gamma_c: f64,
    pub d_m: f64,
    pub m_bar: f64,
}

impl TheoremConstants {
    pub fn new(p: &TheoremInputs) -> Result<Self> {
        require_positive("alpha", p.alpha)?;
        require_positive("d_M", p.d_m)?;
        let drift = 2.0 * p.eta_bar * p.gamma_c / p.d_m;
        let b1 = 3.0 * p.alpha + 2.5 * p.beta + drift + p.rho / (2.0 * p.d_m);
        let b2 = p.alpha + p.beta;
        let b3 = (2.0 * p.alpha + drift) * p.m_bar;
        Ok(TheoremConstants {
            b1,
            b2,
            b3,
            b_m: b1.max(b2),
            phi_min: (2.0 * b3 / p.alpha).max(2.5 * p.beta / p.alpha),
        })
    }

    /// `sigma1 = lambda^2 b_M x`, `sigma2 = lambda^2 alpha phi x / 2`.
    pub fn sigma_coeffs(&self, lambda_m_c: f64, alpha: f64, phi: f64) -> Result<SigmaCoeffs> {
        if phi <= self.phi_min {
            return Err(Error::InvalidParameter(format!(
                "phi = {phi} must exceed {}",
                self.phi_min
            )));
        }
        let l2 = lambda_m_c * lambda_m_c;
        Ok(SigmaCoeffs {
            s1: l2 * self.b_m,
            s2: 0.5 * l2 * alpha * phi,
        })
    }
}

/// Conservative MEI for a channel whose `c_hat` lies below `kappa`.
pub fn t_hat0(coeffs: &SigmaCoeffs, kappa: f64, m0: f64) -> Result<f64> {
    let (s1, s2) = coeffs.at(kappa);
    t0(s1, s2, m0 / kappa)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeiDecision {
    pub t_mei: f64,
    pub t_hat0: f64,
    pub kappa: f64,
    pub clamped: bool,
    /// Activation value right after the trigger, `m0 / c_hat`.
    pub m_reset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeiPolicy {
    pub configured: f64,
    pub m0: f64,
    pub c0: f64,
    pub v: f64,
}

/// MEI to use from a trigger onward: the configured value, clamped to the
/// band bound `T_hat0(kappa(c_hat))`.
pub fn t_mei_for(c_hat: f64, coeffs: &SigmaCoeffs, policy: &MeiPolicy) -> Result<MeiDecision> {
    require_positive("c_hat", c_hat)?;
    require_positive("v", policy.v)?;
    let k = kappa(c_hat, policy.c0, policy.v);
    let bound = t_hat0(coeffs, k, policy.m0)?;
    let clamped = policy.configured > bound;
    Ok(MeiDecision {
        t_mei: policy.configured.min(bound),
        t_hat0: bound,
        kappa: k,
        clamped,
        m_reset: policy.m0 / c_hat,
    })
}

/// Exact step of `m' = -s (sigma1 m + sigma2)` over `dt`.
pub fn activation_step(m: f64, active: bool, dt: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    if !active {
        return Ok(m);
    }
    let ratio = sigma2 / sigma1;
    let next = (-sigma1 * dt).exp() * (m + ratio) - ratio;
    if next <= 0.0 || !next.is_finite() {
        return Err(Error::MeiOverrun { m: next });
    }
    Ok(next)
}

/// Values of the three trigger functions; any positive entry fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtcValues {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl EtcValues {
    pub fn fired(&self) -> Option<TriggerClause> {
        if self.f1 > 0.0 {
            Some(TriggerClause::F1)
        } else if self.f2 > 0.0 {
            Some(TriggerClause::F2)
        } else if self.f3 > 0.0 {
            Some(TriggerClause::F3)
        } else {
            None
        }
    }
}

pub struct EtcInput<'a> {
    pub c: &'a DMatrix<f64>,
    pub delta_hat: &'a DVector<f64>,
    pub w_hat: &'a DVector<f64>,
    pub c_hat: f64,
    pub delta_now: &'a DVector<f64>,
    pub w_now: &'a DVector<f64>,
    pub c_now: f64,
    pub gamma_delta: f64,
    pub gamma_w: f64,
    pub gamma_c: f64,
}

/// Evaluates the hybrid trigger rule on the sender's current state.
pub fn etc_values(inp: &EtcInput<'_>) -> EtcValues {
    let ed = inp.c * (inp.delta_hat - inp.delta_now);
    let ew = inp.c * (inp.w_hat - inp.w_now);
    EtcValues {
        f1: inp.c_hat * ed.norm_squared() - inp.gamma_delta,
        f2: ew.norm_squared() - inp.gamma_w,
        f3: inp.c_now - inp.c_hat - inp.gamma_c,
    }
}

pub fn etc_fire(inp: &EtcInput<'_>) -> Option<TriggerClause> {
    etc_values(inp).fired()
}
