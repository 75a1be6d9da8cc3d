//! Dense potential tables over ordered variable scopes.
//!
//! Addressing is row-major with the **last** scope variable varying fastest:
//! for scope `(v₀, …, v_{k-1})` with cardinalities `(c₀, …, c_{k-1})` the
//! assignment `(x₀, …, x_{k-1})` lives at `Σ xᵢ·∏_{j>i} c_j`. Derived scopes
//! (restriction targets, interfaces) are kept in ascending variable-id order.

use crate::error::GraphError;
use crate::scalar::Scalar;
use crate::semiring::Semiring;

/// Row-major strides for the given cardinalities (last variable fastest).
pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * cards[i + 1];
    }
    out
}

/// Linear index of `states` under `cards`.
pub fn linear_index(cards: &[usize], states: &[usize]) -> usize {
    states.iter().zip(cards).fold(0, |acc, (&x, &c)| acc * c + x)
}

/// Inverse of [`linear_index`], writing into `out`.
pub fn decode_index(mut index: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
}

/// Product of cardinalities, `None` on overflow.
pub fn state_count(cards: &[usize]) -> Option<usize> {
    cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c))
}

/// Mixed-radix counter enumerating assignments in table order.
#[derive(Clone, Debug)]
pub struct Odometer {
    cards: Vec<usize>,
    states: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub fn new(cards: &[usize]) -> Self {
        Odometer { cards: cards.to_vec(), states: vec![0; cards.len()], done: cards.contains(&0) }
    }

    /// Current assignment, or `None` once exhausted.
    pub fn current(&self) -> Option<&[usize]> {
        (!self.done).then_some(self.states.as_slice())
    }

    /// Moves to the next assignment; returns `false` when wrapping past the end.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        for i in (0..self.cards.len()).rev() {
            self.states[i] += 1;
            if self.states[i] < self.cards[i] {
                return true;
            }
            self.states[i] = 0;
        }
        self.done = true;
        false
    }
}

/// A table over an ordered scope: an element of the local function space of
/// that scope.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSlice<T> {
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    pub table: Vec<T>,
}

impl<T: Scalar> PotentialSlice<T> {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, table: Vec<T>) -> Result<Self, GraphError> {
        if scope.len() != cards.len() {
            return Err(GraphError::ShapeMismatch { expected: scope.len(), actual: cards.len() });
        }
        let expected = state_count(&cards).ok_or(GraphError::StateSpaceOverflow)?;
        if expected != table.len() {
            return Err(GraphError::ShapeMismatch { expected, actual: table.len() });
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(GraphError::DuplicateScopeVariable { variable: *v });
            }
        }
        Ok(PotentialSlice { scope, cards, table })
    }

    /// Constant table over the given scope.
    pub fn filled(scope: Vec<usize>, cards: Vec<usize>, value: T) -> Self {
        let n = state_count(&cards).expect("state space fits in memory");
        PotentialSlice { scope, cards, table: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn position(&self, variable: usize) -> Option<usize> {
        self.scope.iter().position(|&v| v == variable)
    }

    pub fn cardinality_of(&self, variable: usize) -> Option<usize> {
        self.position(variable).map(|p| self.cards[p])
    }

    /// Restriction to `target` (any subset of the scope); the result scope is
    /// `target` in ascending id order.
    pub fn restrict(&self, target: &[usize], semiring: Semiring) -> Result<Self, GraphError> {
        let mut sorted = target.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        self.marginalize_to(&sorted, semiring)
    }

    /// ⊕-eliminates every variable outside `target`, keeping the exact order
    /// given in `target`.
    pub fn marginalize_to(&self, target: &[usize], semiring: Semiring) -> Result<Self, GraphError> {
        let positions: Vec<usize> = target
            .iter()
            .map(|&v| self.position(v).ok_or(GraphError::NotSubset { variable: v }))
            .collect::<Result<_, _>>()?;
        let cards: Vec<usize> = positions.iter().map(|&p| self.cards[p]).collect();
        if positions.len() == self.scope.len() && positions.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let out_strides = strides(&cards);
        let mut out = PotentialSlice::filled(target.to_vec(), cards, semiring.zero());
        let mut odo = Odometer::new(&self.cards);
        let mut idx = 0;
        while let Some(states) = odo.current() {
            let t: usize = positions.iter().zip(&out_strides).map(|(&p, &s)| states[p] * s).sum();
            out.table[t] = semiring.add(out.table[t], self.table[idx]);
            idx += 1;
            odo.advance();
        }
        Ok(out)
    }

    /// Re-expresses the table over `scope ⊇ self.scope`, repeating values
    /// along the new axes.
    pub fn broadcast_to(&self, scope: &[usize], cards: &[usize]) -> Result<Self, GraphError> {
        let positions: Vec<usize> = self
            .scope
            .iter()
            .map(|&v| scope.iter().position(|&w| w == v).ok_or(GraphError::NotSubset { variable: v }))
            .collect::<Result<_, _>>()?;
        let own_strides = strides(&self.cards);
        let n = state_count(cards).ok_or(GraphError::StateSpaceOverflow)?;
        let mut table = Vec::with_capacity(n);
        let mut odo = Odometer::new(cards);
        while let Some(states) = odo.current() {
            let i: usize = positions.iter().zip(&own_strides).map(|(&p, &s)| states[p] * s).sum();
            table.push(self.table[i]);
            odo.advance();
        }
        Ok(PotentialSlice { scope: scope.to_vec(), cards: cards.to_vec(), table })
    }

    /// ⊙-multiplies `other` into `self`; `other.scope` must be a subset of `self.scope`.
    pub fn absorb(&mut self, other: &PotentialSlice<T>, semiring: Semiring) -> Result<(), GraphError> {
        let positions: Vec<usize> = other
            .scope
            .iter()
            .map(|&v| self.position(v).ok_or(GraphError::NotSubset { variable: v }))
            .collect::<Result<_, _>>()?;
        let other_strides = strides(&other.cards);
        let mut odo = Odometer::new(&self.cards);
        let mut idx = 0;
        while let Some(states) = odo.current() {
            let j: usize = positions.iter().zip(&other_strides).map(|(&p, &s)| states[p] * s).sum();
            self.table[idx] = semiring.mul(self.table[idx], other.table[j]);
            idx += 1;
            odo.advance();
        }
        Ok(())
    }

    /// Pointwise ⊙-product over the union scope (`self.scope` followed by the
    /// new variables of `other` in their order).
    pub fn product(&self, other: &PotentialSlice<T>, semiring: Semiring) -> Result<Self, GraphError> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            match self.position(*v) {
                Some(p) if self.cards[p] != *c => return Err(GraphError::CardinalityConflict { variable: *v }),
                Some(_) => {}
                None => {
                    scope.push(*v);
                    cards.push(*c);
                }
            }
        }
        let mut out = self.broadcast_to(&scope, &cards)?;
        out.absorb(other, semiring)?;
        Ok(out)
    }

    /// ⊕-total of all entries.
    pub fn total(&self, semiring: Semiring) -> T {
        semiring.sum(self.table.iter().copied())
    }

    /// Value at the assignment given for this table's own scope order.
    pub fn value(&self, states: &[usize]) -> T {
        self.table[linear_index(&self.cards, states)]
    }

    /// Largest absolute entrywise difference after aligning `other` to this scope.
    pub fn max_abs_diff(&self, other: &PotentialSlice<T>) -> Result<T, GraphError> {
        let aligned = other.marginalize_to(&self.scope, Semiring::SumProduct)?;
        Ok(self
            .table
            .iter()
            .zip(&aligned.table)
            .map(|(&a, &b)| if a == b { T::zero() } else { (a - b).abs() })
            .fold(T::zero(), T::max))
    }
}
