use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("action out of box: {0}")]
    OutOfBox(String),

    #[error("best-response iteration did not converge after {iterations} iterations (last iterate {last:?})")]
    NonConvergence { iterations: usize, last: Vec<f64> },

    #[error("infeasible guarantees: {0}")]
    InfeasibleGuarantees(String),

    #[error("empty payoff set: {0}")]
    EmptySet(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
