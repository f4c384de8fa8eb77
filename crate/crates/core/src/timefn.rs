//! Scalar functions of simulation time used for trigger levels and
//! detection thresholds.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFn {
    Const {
        value: f64,
    },
    /// `offset + a * exp(-b t)`
    ExpDecay {
        a: f64,
        b: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amp * sin(freq t + phase)`
    Sinusoid {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    Sum {
        terms: Vec<TimeFn>,
    },
}

impl TimeFn {
    pub fn exp_decay(a: f64, b: f64) -> Self {
        TimeFn::ExpDecay { a, b, offset: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Const { value } => *value,
            TimeFn::ExpDecay { a, b, offset } => offset + a * (-b * t).exp(),
            TimeFn::Sinusoid {
                amp,
                freq,
                phase,
                offset,
            } => offset + amp * (freq * t + phase).sin(),
            TimeFn::Sum { terms } => terms.iter().map(|f| f.eval(t)).sum(),
        }
    }

    /// Whether the function is absolutely integrable on `[0, inf)`.
    ///
    /// Only closed forms that are recognizably so are accepted: zero
    /// constants and offset-free exponential decays with `b > 0`.
    pub fn is_absolutely_integrable(&self) -> bool {
        match self {
            TimeFn::Const { value } => *value == 0.0,
            TimeFn::ExpDecay { b, offset, .. } => *b > 0.0 && *offset == 0.0,
            TimeFn::Sinusoid { amp, offset, .. } => *amp == 0.0 && *offset == 0.0,
            TimeFn::Sum { terms } => terms.iter().all(TimeFn::is_absolutely_integrable),
        }
    }
}
