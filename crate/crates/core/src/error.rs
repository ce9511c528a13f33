use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    InvalidNode(usize, usize, usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("unknown edge ({0}, {1})")]
    UnknownEdge(usize, usize),

    #[error("graph is not strongly connected: {0}")]
    NotStronglyConnected(String),

    #[error("node {0} has zero outgoing weight")]
    ZeroRowSum(usize),

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("weights are not symmetric on edge ({0}, {1})")]
    NonSymmetric(usize, usize),

    #[error("node {0} loses all outgoing mass in this realization")]
    RowMassLost(usize),

    #[error("no closed-form realization probability for correlated failures")]
    CorrelatedNoClosedForm,

    #[error("enumeration over {0} risky edges exceeds the cap of {1}")]
    EnumerationCap(usize, usize),

    #[error("insufficient history: need {needed} iterates, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("objective evaluation failed at a perturbed point: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the CLI: 2 for bad input or configuration,
    /// 3 for infeasible problems, 4 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Dimension { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::ZeroRowSum(_)
            | Error::Reducible(_)
            | Error::Singular(_)
            | Error::RowMassLost(_)
            | Error::Evaluation(_) => 4,
            _ => 1,
        }
    }
}
