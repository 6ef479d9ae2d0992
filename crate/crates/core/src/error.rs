use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node {node} out of range (model has {count} nodes)")]
    NodeOutOfRange { node: usize, count: usize },

    #[error("state {state} out of range for node {node} (cardinality {cardinality})")]
    StateOutOfRange { node: usize, state: usize, cardinality: usize },

    #[error("assignment has {found} values but the model has {expected} nodes")]
    AssignmentLength { expected: usize, found: usize },

    #[error("nodes {from} and {to} are not adjacent")]
    NotAnEdge { from: usize, to: usize },

    #[error("vector lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("entries must be strictly positive and finite, found {0}")]
    NonPositive(f64),

    #[error("tree expansion exceeds the node budget of {budget}")]
    BudgetExceeded { budget: usize },

    #[error("state space of {required} assignments exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { required: u128, cap: u128 },

    #[error("node {node} has cardinality {cardinality}; only binary models are supported")]
    NotBinary { node: usize, cardinality: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
