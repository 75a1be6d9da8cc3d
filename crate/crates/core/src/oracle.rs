//! Brute-force enumeration for desk-scale ground truth.

use thiserror::Error;

use crate::factor_graph::FactorGraph;
use crate::potential::Odometer;
use crate::scalar::Scalar;

pub const DEFAULT_CAP: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("state space of {size:?} assignments exceeds the cap of {cap}")]
    CapExceeded { size: Option<usize>, cap: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactMarginals<T> {
    /// ⊕ over all assignments of the joint weight.
    pub z: T,
    /// Normalized per-variable marginals; uniform placeholders when `unsat`.
    pub marginals: Vec<Vec<T>>,
    /// Unnormalized per-variable tallies.
    pub tallies: Vec<Vec<T>>,
    pub unsat: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactMap<T> {
    pub assignment: Vec<usize>,
    pub weight: T,
}

fn check_cap<T: Scalar>(graph: &FactorGraph<T>, cap: usize) -> Result<(), OracleError> {
    match graph.state_space_size() {
        Some(n) if n <= cap => Ok(()),
        size => Err(OracleError::CapExceeded { size, cap }),
    }
}

pub fn exact_marginals<T: Scalar>(graph: &FactorGraph<T>) -> Result<ExactMarginals<T>, OracleError> {
    exact_marginals_capped(graph, DEFAULT_CAP)
}

/// Enumerates every assignment, ⊕-accumulating Z and per-variable tallies.
pub fn exact_marginals_capped<T: Scalar>(graph: &FactorGraph<T>, cap: usize) -> Result<ExactMarginals<T>, OracleError> {
    check_cap(graph, cap)?;
    let r = graph.semiring();
    let cards = graph.cardinalities();
    let mut tallies: Vec<Vec<T>> = cards.iter().map(|&c| vec![r.zero(); c]).collect();
    let mut z = r.zero::<T>();
    let mut odo = Odometer::new(&cards);
    while let Some(x) = odo.current() {
        let w = graph.joint_weight_unchecked(x);
        if !r.is_zero(w) {
            z = r.add(z, w);
            for (v, &s) in x.iter().enumerate() {
                tallies[v][s] = r.add(tallies[v][s], w);
            }
        }
        odo.advance();
    }
    let unsat = r.is_zero(z);
    let marginals = tallies
        .iter()
        .map(|t| {
            let mut p = t.clone();
            if !r.normalize(&mut p) {
                p = vec![T::one() / T::lit(p.len() as f64); p.len()];
            }
            p
        })
        .collect();
    Ok(ExactMarginals { z, marginals, tallies, unsat })
}

pub fn exact_map<T: Scalar>(graph: &FactorGraph<T>) -> Result<ExactMap<T>, OracleError> {
    exact_map_capped(graph, DEFAULT_CAP)
}

/// Best assignment under the semiring's preference order; ties go to the
/// lexicographically smallest assignment.
pub fn exact_map_capped<T: Scalar>(graph: &FactorGraph<T>, cap: usize) -> Result<ExactMap<T>, OracleError> {
    check_cap(graph, cap)?;
    let r = graph.semiring();
    let cards = graph.cardinalities();
    let mut odo = Odometer::new(&cards);
    let mut best: Option<ExactMap<T>> = None;
    while let Some(x) = odo.current() {
        let w = graph.joint_weight_unchecked(x);
        if best.as_ref().is_none_or(|b| r.prefers(w, b.weight)) {
            best = Some(ExactMap { assignment: x.to_vec(), weight: w });
        }
        odo.advance();
    }
    Ok(best.expect("at least one assignment"))
}
