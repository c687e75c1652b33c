use std::fmt;

use thiserror::Error;

/// Clause of the limit-determinism conditions a state can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitDeterminismClause {
    /// Some letter has no successor.
    NotTotal,
    /// Some letter has more than one successor.
    NotDeterministic,
    /// A successor lies outside the deterministic part.
    LeavesDeterministicPart,
    /// The state has an outgoing ε-transition.
    EpsilonInDeterministicPart,
    /// An accepting state is outside the deterministic part.
    AcceptingOutsideDeterministicPart,
    /// An ε-transition ends in the non-deterministic part.
    EpsilonIntoNondeterministicPart,
}

impl fmt::Display for LimitDeterminismClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::NotTotal => "transitions in Q_D must be total",
            Self::NotDeterministic => "transitions in Q_D must have exactly one successor",
            Self::LeavesDeterministicPart => "transitions in Q_D must stay within Q_D",
            Self::EpsilonInDeterministicPart => "ε-transitions are not allowed in Q_D",
            Self::AcceptingOutsideDeterministicPart => "accepting states must lie in Q_D",
            Self::EpsilonIntoNondeterministicPart => "ε-transitions must run from Q_N to Q_D",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("action {action} is not enabled at state {state}")]
    UnknownAction { state: usize, action: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported acceptance condition: {0}")]
    UnsupportedAcceptance(String),
    #[error("atomic proposition mismatch: {0}")]
    ApMismatch(String),
    #[error("automaton is not limit-deterministic: state {state}: {clause}")]
    NotLimitDeterministic {
        state: usize,
        clause: LimitDeterminismClause,
    },
    #[error("alphabet over {0} propositions is too large to enumerate")]
    AlphabetTooLarge(usize),
    #[error("invalid extended action: {0}")]
    InvalidAction(String),
    #[error("explicit-state budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("no convergence within {0} iterations")]
    NonConvergence(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("policy undefined at reachable state {0}")]
    UndefinedPolicy(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
