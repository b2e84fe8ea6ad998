use thiserror::Error;

use crate::selector::TraceEntry;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: edge weight must be positive, got {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },

    #[error("self-loop on node '{label}' is not allowed")]
    SelfLoop { label: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("operation requires an undirected (symmetric) graph")]
    NotUndirected,

    #[error("matrix is singular to working precision ({context}, condition estimate {condition:.3e})")]
    Singular {
        context: &'static str,
        condition: f64,
    },

    #[error("rank-1 update is singular (denominator {denominator:.3e})")]
    SingularUpdate { denominator: f64 },

    #[error("zero pivot {pivot:.3e} at index {index}")]
    ZeroPivot { index: usize, pivot: f64 },

    #[error("integration diverged at t = {time}; reduce the step size")]
    Divergence { time: f64 },

    #[error("exhaustive search needs {required} evaluations, budget is {budget}; use bound search instead")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("bound search exceeded {calls} greedy calls without converging")]
    IterationCap { calls: usize, trace: Vec<TraceEntry> },

    #[error("no connected sample after {attempts} attempts")]
    ConnectivityNotAchieved { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical kernels, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::SingularUpdate { .. }
                | Error::ZeroPivot { .. }
                | Error::Divergence { .. }
                | Error::IterationCap { .. }
        )
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
