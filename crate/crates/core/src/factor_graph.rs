//! Discrete factor graphs over a pluggable semiring.

use serde::{Deserialize, Serialize};

use crate::error::{GraphError, Violation};
use crate::potential::{state_count, strides, PotentialSlice};
use crate::scalar::Scalar;
use crate::semiring::Semiring;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub id: usize,
    pub cardinality: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorDecl<T> {
    pub id: usize,
    pub scope: Vec<usize>,
    pub table: Vec<T>,
}

/// Bipartite factor graph with cached incidence.
///
/// Each (factor, scope position) pair is an undirected edge with id
/// `edge_offset[f] + pos`; both half-edges of a message state are indexed by it.
#[derive(Clone, Debug)]
pub struct FactorGraph<T> {
    semiring: Semiring,
    variables: Vec<VariableDecl>,
    factors: Vec<FactorDecl<T>>,
    zero_tol: T,
    edge_offset: Vec<usize>,
    edge_factor: Vec<usize>,
    edge_var: Vec<usize>,
    edge_pos: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl<T: Scalar> PartialEq for FactorGraph<T> {
    fn eq(&self, other: &Self) -> bool {
        self.semiring == other.semiring && self.variables == other.variables && self.factors == other.factors
    }
}

impl<T: Scalar> FactorGraph<T> {
    /// Builds and validates.
    pub fn new(
        semiring: Semiring,
        variables: Vec<VariableDecl>,
        factors: Vec<FactorDecl<T>>,
    ) -> Result<Self, GraphError> {
        let g = Self::new_unchecked(semiring, variables, factors);
        g.validate().map_err(GraphError::Invalid)?;
        Ok(g)
    }

    /// Builds without validation. Incidence ignores out-of-range scope ids.
    pub fn new_unchecked(semiring: Semiring, variables: Vec<VariableDecl>, factors: Vec<FactorDecl<T>>) -> Self {
        let mut edge_offset = Vec::with_capacity(factors.len());
        let mut edge_factor = Vec::new();
        let mut edge_var = Vec::new();
        let mut edge_pos = Vec::new();
        let mut var_edges = vec![Vec::new(); variables.len()];
        for (f, fac) in factors.iter().enumerate() {
            edge_offset.push(edge_factor.len());
            for (pos, &v) in fac.scope.iter().enumerate() {
                if v < variables.len() {
                    var_edges[v].push(edge_factor.len());
                }
                edge_factor.push(f);
                edge_var.push(v);
                edge_pos.push(pos);
            }
        }
        FactorGraph {
            semiring,
            variables,
            factors,
            zero_tol: T::zero(),
            edge_offset,
            edge_factor,
            edge_var,
            edge_pos,
            var_edges,
        }
    }

    pub fn builder(semiring: Semiring) -> GraphBuilder<T> {
        GraphBuilder { semiring, variables: Vec::new(), factors: Vec::new() }
    }

    /// Checks every structural invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        for (i, v) in self.variables.iter().enumerate() {
            if v.id != i {
                out.push(Violation::VariableIdMismatch { position: i, id: v.id });
            }
            if v.cardinality == 0 {
                out.push(Violation::ZeroCardinality { variable: v.id });
            }
        }
        for (i, f) in self.factors.iter().enumerate() {
            if f.id != i {
                out.push(Violation::FactorIdMismatch { position: i, id: f.id });
            }
            let mut scope_ok = true;
            for (p, &v) in f.scope.iter().enumerate() {
                if v >= self.variables.len() {
                    out.push(Violation::UnknownVariable { factor: f.id, variable: v });
                    scope_ok = false;
                } else if f.scope[..p].contains(&v) {
                    out.push(Violation::DuplicateScopeVariable { factor: f.id, variable: v });
                }
            }
            if scope_ok {
                let cards: Vec<usize> = f.scope.iter().map(|&v| self.variables[v].cardinality).collect();
                match state_count(&cards) {
                    Some(expected) if expected != f.table.len() => {
                        out.push(Violation::TableLength { factor: f.id, expected, actual: f.table.len() })
                    }
                    None => out.push(Violation::StateSpaceOverflow { factor: f.id }),
                    _ => {}
                }
            }
            if let Some((index, &value)) = f.table.iter().enumerate().find(|(_, &x)| !self.semiring.is_valid(x)) {
                out.push(Violation::InvalidEntry {
                    factor: f.id,
                    index,
                    value: value.as_f64(),
                    semiring: self.semiring,
                });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    /// Tolerance used when computing supports (default exact zero).
    pub fn zero_tolerance(&self) -> T {
        self.zero_tol
    }

    pub fn with_zero_tolerance(mut self, tol: T) -> Self {
        self.zero_tol = tol;
        self
    }

    pub fn variables(&self) -> &[VariableDecl] {
        &self.variables
    }

    pub fn factors(&self) -> &[FactorDecl<T>] {
        &self.factors
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn cardinality(&self, v: usize) -> usize {
        self.variables[v].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn factor(&self, f: usize) -> &FactorDecl<T> {
        &self.factors[f]
    }

    pub fn scope(&self, f: usize) -> &[usize] {
        &self.factors[f].scope
    }

    pub fn scope_cards(&self, f: usize) -> Vec<usize> {
        self.factors[f].scope.iter().map(|&v| self.cardinality(v)).collect()
    }

    /// Factor `f` as a standalone slice.
    pub fn slice(&self, f: usize) -> PotentialSlice<T> {
        PotentialSlice {
            scope: self.factors[f].scope.clone(),
            cards: self.scope_cards(f),
            table: self.factors[f].table.clone(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edge_factor.len()
    }

    /// `(factor, variable, scope position)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize, usize) {
        (self.edge_factor[e], self.edge_var[e], self.edge_pos[e])
    }

    pub fn edge_of(&self, f: usize, pos: usize) -> usize {
        self.edge_offset[f] + pos
    }

    /// Edge ids of factor `f` in scope order.
    pub fn factor_edges(&self, f: usize) -> std::ops::Range<usize> {
        let start = self.edge_offset[f];
        start..start + self.factors[f].scope.len()
    }

    pub fn variable_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[v]
    }

    pub fn edge_id(&self, f: usize, v: usize) -> Option<usize> {
        self.factors[f].scope.iter().position(|&w| w == v).map(|p| self.edge_offset[f] + p)
    }

    /// Factors adjacent to `v`, in edge order.
    pub fn variable_factors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.var_edges[v].iter().map(move |&e| self.edge_factor[e])
    }

    /// Size of the joint state space, `None` on overflow.
    pub fn state_space_size(&self) -> Option<usize> {
        state_count(&self.cardinalities())
    }

    /// True when the bipartite variable/factor graph has no cycle.
    pub fn is_forest(&self) -> bool {
        let n = self.variables.len();
        let mut uf = UnionFind::new(n + self.factors.len());
        (0..self.num_edges()).all(|e| uf.union(self.edge_var[e], n + self.edge_factor[e]))
    }

    /// Connected components of the bipartite graph, as variable and factor lists.
    pub fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.variables.len();
        let mut uf = UnionFind::new(n + self.factors.len());
        for e in 0..self.num_edges() {
            uf.union(self.edge_var[e], n + self.edge_factor[e]);
        }
        let mut slot = vec![usize::MAX; n + self.factors.len()];
        let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for node in 0..n + self.factors.len() {
            let r = uf.find(node);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push((Vec::new(), Vec::new()));
            }
            let c = &mut out[slot[r]];
            if node < n {
                c.0.push(node);
            } else {
                c.1.push(node - n);
            }
        }
        out
    }

    /// Checks an assignment against the declared cardinalities.
    pub fn check_assignment(&self, assignment: &[usize]) -> Result<(), GraphError> {
        if assignment.len() != self.variables.len() {
            return Err(GraphError::AssignmentLength { expected: self.variables.len(), actual: assignment.len() });
        }
        for (v, (&x, decl)) in assignment.iter().zip(&self.variables).enumerate() {
            if x >= decl.cardinality {
                return Err(GraphError::StateOutOfRange { variable: v, state: x, cardinality: decl.cardinality });
            }
        }
        Ok(())
    }

    /// Table index of factor `f` at a full assignment.
    pub fn factor_index(&self, f: usize, assignment: &[usize]) -> usize {
        self.factors[f].scope.iter().fold(0, |acc, &v| acc * self.cardinality(v) + assignment[v])
    }

    /// ⊙-product of every factor at the assignment.
    pub fn joint_weight(&self, assignment: &[usize]) -> Result<T, GraphError> {
        self.check_assignment(assignment)?;
        Ok(self.joint_weight_unchecked(assignment))
    }

    pub(crate) fn joint_weight_unchecked(&self, assignment: &[usize]) -> T {
        let r = self.semiring;
        let mut acc = r.one();
        for f in 0..self.factors.len() {
            acc = r.mul(acc, self.factors[f].table[self.factor_index(f, assignment)]);
        }
        acc
    }

    /// Row-major strides of factor `f`'s table.
    pub fn factor_strides(&self, f: usize) -> Vec<usize> {
        strides(&self.scope_cards(f))
    }

    /// Consumes the graph into its declarations.
    pub fn into_parts(self) -> (Semiring, Vec<VariableDecl>, Vec<FactorDecl<T>>) {
        (self.semiring, self.variables, self.factors)
    }

    /// Same structure with a different scalar type.
    pub fn cast<U: Scalar>(&self) -> FactorGraph<U> {
        let factors = self
            .factors
            .iter()
            .map(|f| FactorDecl {
                id: f.id,
                scope: f.scope.clone(),
                table: f.table.iter().map(|x| U::lit(x.as_f64())).collect(),
            })
            .collect();
        FactorGraph::new_unchecked(self.semiring, self.variables.clone(), factors)
            .with_zero_tolerance(U::lit(self.zero_tol.as_f64()))
    }
}

/// Incremental constructor assigning dense ids.
#[derive(Clone, Debug)]
pub struct GraphBuilder<T> {
    semiring: Semiring,
    variables: Vec<VariableDecl>,
    factors: Vec<FactorDecl<T>>,
}

impl<T: Scalar> GraphBuilder<T> {
    pub fn variable(&mut self, cardinality: usize) -> usize {
        self.labeled_variable(cardinality, None::<String>)
    }

    pub fn labeled_variable(&mut self, cardinality: usize, label: Option<impl Into<String>>) -> usize {
        let id = self.variables.len();
        self.variables.push(VariableDecl { id, cardinality, label: label.map(Into::into) });
        id
    }

    pub fn factor(&mut self, scope: &[usize], table: Vec<T>) -> usize {
        let id = self.factors.len();
        self.factors.push(FactorDecl { id, scope: scope.to_vec(), table });
        id
    }

    /// Factor whose table is computed from the scope assignment.
    pub fn factor_fn(&mut self, scope: &[usize], mut f: impl FnMut(&[usize]) -> T) -> usize {
        let cards: Vec<usize> = scope.iter().map(|&v| self.variables[v].cardinality).collect();
        let mut table = Vec::new();
        let mut odo = crate::potential::Odometer::new(&cards);
        while let Some(s) = odo.current() {
            table.push(f(s));
            odo.advance();
        }
        self.factor(scope, table)
    }

    pub fn build(self) -> Result<FactorGraph<T>, GraphError> {
        FactorGraph::new(self.semiring, self.variables, self.factors)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
