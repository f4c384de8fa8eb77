use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node subset must be nonempty")]
    EmptySubset,

    #[error("isolation budget r = {r} must be smaller than the node count {n}")]
    IsolationBudget { r: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("input map rank-deficient: rank {rank} < {inputs} inputs")]
    RankDeficient { rank: usize, inputs: usize },

    #[error("non-square actuated block unsupported: n2 = {n2}, p = {p}")]
    NonSquareInput { n2: usize, p: usize },

    #[error("matrix P is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("agent {agent} has no stored sample for active neighbor {neighbor}")]
    MissingSample { agent: usize, neighbor: usize },

    #[error("MEI overrun: activation variable reached {m:e}")]
    MeiOverrun { m: f64 },

    #[error("threshold {which} falls below margin * gamma at t = {t}")]
    ThresholdViolation { which: &'static str, t: f64 },

    #[error("scenario invalid: {0}")]
    Scenario(String),

    #[error("numerical abort at t = {t}: {reason}")]
    NumericalAbort { t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures raised while checking a scenario before any
    /// integration step runs. A file that does not parse is not one of them.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Scenario(_)
                | Error::ThresholdViolation { .. }
                | Error::InvalidGraph(_)
                | Error::Dimension(_)
                | Error::RankDeficient { .. }
                | Error::NonSquareInput { .. }
                | Error::NotPositiveDefinite
                | Error::InvalidParameter(_)
                | Error::IsolationBudget { .. }
        )
    }

    /// True for failures raised mid-run by the integrator or the activation
    /// variables.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalAbort { .. } | Error::MeiOverrun { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
