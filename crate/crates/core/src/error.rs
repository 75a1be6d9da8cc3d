use thiserror::Error;

use crate::semiring::Semiring;

/// A single well-formedness problem in a factor graph.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("variable at position {position} has id {id}; ids must be contiguous from 0")]
    VariableIdMismatch { position: usize, id: usize },
    #[error("variable {variable} has cardinality 0")]
    ZeroCardinality { variable: usize },
    #[error("factor at position {position} has id {id}; ids must be contiguous from 0")]
    FactorIdMismatch { position: usize, id: usize },
    #[error("factor {factor} references unknown variable {variable}")]
    UnknownVariable { factor: usize, variable: usize },
    #[error("factor {factor} lists variable {variable} more than once")]
    DuplicateScopeVariable { factor: usize, variable: usize },
    #[error("factor {factor} table has {actual} entries, expected {expected}")]
    TableLength { factor: usize, expected: usize, actual: usize },
    #[error("factor {factor} entry {index} = {value} is not a valid {semiring} value")]
    InvalidEntry { factor: usize, index: usize, value: f64, semiring: Semiring },
    #[error("factor {factor} state space overflows usize")]
    StateSpaceOverflow { factor: usize },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid factor graph ({} violation(s)): {}", .0.len(), first_violation(.0))]
    Invalid(Vec<Violation>),
    #[error("assignment has {actual} entries, expected {expected}")]
    AssignmentLength { expected: usize, actual: usize },
    #[error("state {state} of variable {variable} is outside cardinality {cardinality}")]
    StateOutOfRange { variable: usize, state: usize, cardinality: usize },
    #[error("variable {variable} is not in the source scope")]
    NotSubset { variable: usize },
    #[error("variable {variable} appears with two different cardinalities")]
    CardinalityConflict { variable: usize },
    #[error("variable {variable} appears twice in a scope")]
    DuplicateScopeVariable { variable: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("state space overflows usize")]
    StateSpaceOverflow,
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|x| x.to_string()).unwrap_or_default()
}
