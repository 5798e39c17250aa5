use thiserror::Error;

use crate::solver::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The SINR targets cannot be met within the power budget.
    /// `shortfall[k]` is how far (linear ratio) user `k` falls short of the
    /// threshold under the best-effort beamformer scaled to the budget.
    #[error("SINR targets infeasible under the power budget (min power {min_power:?} W, shortfall {shortfall:?})")]
    InfeasibleSinr {
        shortfall: Vec<f64>,
        min_power: Option<f64>,
    },

    #[error("conic solver terminated with status {0:?}")]
    Solver(SolveStatus),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(vec![msg.into()])
    }
}
