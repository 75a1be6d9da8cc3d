//! Boolean transport kernels, cycle holonomy and SCC mode quotients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor_graph::FactorGraph;
use crate::nerve::{fundamental_cycle, Backbone, FactorNerve, FundamentalCycle};
use crate::potential::{state_count, Odometer};
use crate::scalar::Scalar;
use crate::semiring::Semiring;

pub const DEFAULT_INTERFACE_CAP: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HolonomyError {
    #[error("interface {interface:?} has {size:?} states, above the cap of {cap}")]
    InterfaceTooLarge { interface: Vec<usize>, size: Option<usize>, cap: usize },
    #[error("variable {variable} is not in the scope of factor {factor}")]
    NotInScope { factor: usize, variable: usize },
    #[error(transparent)]
    Nerve(#[from] crate::nerve::NerveError),
}

/// Dense Boolean matrix with bitset rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for BoolMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.row_strings()).finish()
    }
}

impl BoolMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        BoolMatrix { rows, cols, words, bits: vec![0; rows * words] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i);
        }
        m
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j);
            }
        }
        m
    }

    /// Parses rows like `"01"`.
    pub fn from_rows(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, ch) in r.chars().enumerate() {
                if ch == '1' {
                    m.set(i, j);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Columns set in row `i`.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    w * 64 + b
                })
            })
        })
    }

    /// Boolean product `self · other`.
    pub fn mul(&self, other: &BoolMatrix) -> BoolMatrix {
        assert_eq!(self.cols, other.rows, "Boolean product shape mismatch");
        let mut out = BoolMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = i * out.words;
            for k in self.row_ones(i) {
                for (d, &s) in out.bits[dst..dst + out.words].iter_mut().zip(other.row(k)) {
                    *d |= s;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> BoolMatrix {
        let mut out = BoolMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in self.row_ones(i).collect::<Vec<_>>() {
                out.set(j, i);
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == BoolMatrix::identity(self.rows)
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Exactly one 1 in every row and column.
    pub fn is_permutation(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| self.row_ones(i).count() == 1)
            && (0..self.cols).all(|j| (0..self.rows).filter(|&i| self.get(i, j)).count() == 1)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_strings(&self) -> Vec<String> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| if self.get(i, j) { '1' } else { '0' }).collect()).collect()
    }

    /// Entrywise OR.
    pub fn or(&self, other: &BoolMatrix) -> BoolMatrix {
        let mut out = self.clone();
        for (d, &s) in out.bits.iter_mut().zip(&other.bits) {
            *d |= s;
        }
        out
    }
}

/// Which table entries count as support when building kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportPolicy {
    /// Entries that are not the semiring zero (within `tol`).
    Support { tol: f64 },
    /// Entries within `rel_tol` of the table's best entry.
    Dominant { rel_tol: f64 },
}

impl Default for SupportPolicy {
    fn default() -> Self {
        SupportPolicy::Support { tol: 0.0 }
    }
}

impl SupportPolicy {
    /// Support mask of a table.
    pub fn mask<T: Scalar>(&self, semiring: Semiring, table: &[T]) -> Vec<bool> {
        match *self {
            SupportPolicy::Support { tol } => {
                let tol = T::lit(tol);
                table.iter().map(|&x| !semiring.is_zero_tol(x, tol)).collect()
            }
            SupportPolicy::Dominant { rel_tol } => {
                let Some(best) = table.iter().copied().reduce(|a, b| if semiring.prefers(b, a) { b } else { a }) else {
                    return Vec::new();
                };
                if semiring.is_zero(best) {
                    return vec![false; table.len()];
                }
                let slack = T::lit(rel_tol) * best.abs();
                table.iter().map(|&x| !semiring.is_zero(x) && (x - best).abs() <= slack).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportKernel {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub matrix: BoolMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolonomyOptions {
    pub policy: SupportPolicy,
    /// Largest admissible interface state count.
    pub cap: usize,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        HolonomyOptions { policy: SupportPolicy::default(), cap: DEFAULT_INTERFACE_CAP }
    }
}

fn interface_size<T: Scalar>(graph: &FactorGraph<T>, vars: &[usize], cap: usize) -> Result<usize, HolonomyError> {
    let cards: Vec<usize> = vars.iter().map(|&v| graph.cardinality(v)).collect();
    match state_count(&cards) {
        Some(n) if n <= cap => Ok(n),
        size => Err(HolonomyError::InterfaceTooLarge { interface: vars.to_vec(), size, cap }),
    }
}

/// `K(x, y) = 1` iff some full scope assignment agreeing with `x` on `source`
/// and `y` on `target` lies in the factor's support. Shared variables must
/// agree, since both come from one assignment.
pub fn transport_kernel<T: Scalar>(
    graph: &FactorGraph<T>,
    factor: usize,
    source: &[usize],
    target: &[usize],
    opts: &HolonomyOptions,
) -> Result<TransportKernel, HolonomyError> {
    let scope = graph.scope(factor);
    let locate = |vars: &[usize]| -> Result<Vec<usize>, HolonomyError> {
        vars.iter()
            .map(|&v| scope.iter().position(|&w| w == v).ok_or(HolonomyError::NotInScope { factor, variable: v }))
            .collect()
    };
    let (sp, tp) = (locate(source)?, locate(target)?);
    let rows = interface_size(graph, source, opts.cap)?;
    let cols = interface_size(graph, target, opts.cap)?;
    let cards = graph.scope_cards(factor);
    let mask = opts.policy.mask(graph.semiring(), &graph.factor(factor).table);
    let mut m = BoolMatrix::zeros(rows, cols);
    let index = |s: &[usize], pos: &[usize]| pos.iter().fold(0, |acc, &p| acc * cards[p] + s[p]);
    let mut odo = Odometer::new(&cards);
    let mut idx = 0;
    while let Some(s) = odo.current() {
        if mask[idx] {
            m.set(index(s, &sp), index(s, &tp));
        }
        idx += 1;
        odo.advance();
    }
    Ok(TransportKernel { source: source.to_vec(), target: target.to_vec(), matrix: m })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolonomyMatrix {
    pub chord: usize,
    /// Chord interface, ascending.
    pub interface: Vec<usize>,
    pub matrix: BoolMatrix,
}

/// Kernels around the cycle, starting and ending at the chord interface:
/// `f_0: J_e → J_0`, `f_i: J_{i−1} → J_i`, the last one landing on `J_e`.
pub fn cycle_kernels<T: Scalar>(
    graph: &FactorGraph<T>,
    cycle: &FundamentalCycle,
    opts: &HolonomyOptions,
) -> Result<Vec<TransportKernel>, HolonomyError> {
    let k = cycle.len();
    (0..k)
        .map(|i| {
            let src = if i == 0 { &cycle.interfaces[k - 1] } else { &cycle.interfaces[i - 1] };
            transport_kernel(graph, cycle.factors[i], src, &cycle.interfaces[i], opts)
        })
        .collect()
}

/// Boolean product of the cycle's kernels.
pub fn holonomy_matrix<T: Scalar>(
    graph: &FactorGraph<T>,
    cycle: &FundamentalCycle,
    opts: &HolonomyOptions,
) -> Result<HolonomyMatrix, HolonomyError> {
    let kernels = cycle_kernels(graph, cycle, opts)?;
    let matrix = kernels.iter().skip(1).fold(kernels[0].matrix.clone(), |acc, k| acc.mul(&k.matrix));
    Ok(HolonomyMatrix { chord: cycle.chord, interface: cycle.chord_interface().to_vec(), matrix })
}

/// Strongly connected components of a Boolean digraph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeQuotient {
    /// States per mode, each ascending; modes ordered by smallest state.
    pub modes: Vec<Vec<usize>>,
    /// Mode index of every state.
    pub q: Vec<usize>,
    /// `H(x, x) = 1`.
    pub fixed_point: Vec<bool>,
}

impl ModeQuotient {
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.modes.iter().map(Vec::len).collect()
    }
}

/// Iterative Tarjan SCC.
pub fn scc(m: &BoolMatrix) -> Vec<Vec<usize>> {
    let n = m.rows();
    let succ: Vec<Vec<usize>> = (0..n).map(|i| m.row_ones(i).collect()).collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next;
        low[start] = next;
        next += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut it)) = call.last_mut() {
            if let Some(&w) = succ[v].get(*it) {
                *it += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

pub fn mode_quotient(h: &BoolMatrix) -> ModeQuotient {
    let modes = scc(h);
    let mut q = vec![0; h.rows()];
    for (i, mode) in modes.iter().enumerate() {
        for &x in mode {
            q[x] = i;
        }
    }
    let fixed_point = (0..h.rows()).map(|x| h.get(x, x)).collect();
    ModeQuotient { modes, q, fixed_point }
}

pub fn is_trivial(h: &BoolMatrix) -> bool {
    h.is_identity()
}

/// Holonomy and quotient of one chord.
#[derive(Clone, Debug, PartialEq)]
pub struct ChordHolonomy {
    pub cycle: FundamentalCycle,
    pub holonomy: HolonomyMatrix,
    pub quotient: ModeQuotient,
}

impl ChordHolonomy {
    pub fn report(&self, nerve: &FactorNerve) -> ChordReport {
        let e = &nerve.edges[self.cycle.chord];
        ChordReport {
            chord: self.cycle.chord,
            factors: (e.a, e.b),
            cycle: self.cycle.factors.clone(),
            interface: self.holonomy.interface.clone(),
            rows: self.holonomy.matrix.row_strings(),
            mode_sizes: self.quotient.mode_sizes(),
            fixed_points: self.quotient.fixed_point.iter().filter(|&&b| b).count(),
            trivial: is_trivial(&self.holonomy.matrix),
        }
    }
}

/// Serializable per-chord summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordReport {
    pub chord: usize,
    pub factors: (usize, usize),
    pub cycle: Vec<usize>,
    pub interface: Vec<usize>,
    /// Holonomy rows as bit strings.
    pub rows: Vec<String>,
    pub mode_sizes: Vec<usize>,
    pub fixed_points: usize,
    pub trivial: bool,
}

/// Holonomy of every chord, computed in parallel, in chord order.
pub fn analyze_chords<T: Scalar>(
    graph: &FactorGraph<T>,
    nerve: &FactorNerve,
    bb: &Backbone,
    opts: &HolonomyOptions,
) -> Result<Vec<ChordHolonomy>, HolonomyError> {
    bb.chords
        .par_iter()
        .map(|&c| {
            let cycle = fundamental_cycle(nerve, bb, c)?;
            let holonomy = holonomy_matrix(graph, &cycle, opts)?;
            let quotient = mode_quotient(&holonomy.matrix);
            Ok(ChordHolonomy { cycle, holonomy, quotient })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::four_cycle;
    use crate::nerve::{build_factor_nerve, RootRule};
    use crate::potential::PotentialSlice;
    use proptest::prelude::*;

    fn worked_cycle(odd: bool) -> (FactorGraph<f64>, FundamentalCycle) {
        let g = four_cycle::<f64>(odd);
        let n = build_factor_nerve(&g);
        let tree = [(0, 1), (1, 2), (2, 3)].map(|(a, b)| n.edge_between(a, b).unwrap());
        let bb = Backbone::from_tree_edges(&n, &tree, RootRule::LexFirst).unwrap();
        let c = fundamental_cycle(&n, &bb, bb.chords[0]).unwrap();
        (g, c)
    }

    #[test]
    fn copy_and_not_kernels() {
        let g = four_cycle::<f64>(true);
        let o = HolonomyOptions::default();
        assert_eq!(transport_kernel(&g, 3, &[0], &[3], &o).unwrap().matrix, BoolMatrix::identity(2));
        assert_eq!(transport_kernel(&g, 2, &[3], &[2], &o).unwrap().matrix, BoolMatrix::from_rows(&["01", "10"]));
        assert!(transport_kernel(&g, 2, &[0], &[2], &o).is_err());
    }

    #[test]
    fn zero_potential_gives_zero_kernel() {
        let mut b = FactorGraph::<f64>::builder(Semiring::SumProduct);
        let (x, y) = (b.variable(2), b.variable(3));
        b.factor(&[x, y], vec![0.0; 6]);
        let g = b.build().unwrap();
        let k = transport_kernel(&g, 0, &[x], &[y], &HolonomyOptions::default()).unwrap();
        assert!(k.matrix.is_zero());
        assert_eq!((k.matrix.rows(), k.matrix.cols()), (2, 3));
    }

    #[test]
    fn worked_holonomy() {
        let o = HolonomyOptions::default();
        let (g, c) = worked_cycle(true);
        let kernels = cycle_kernels(&g, &c, &o).unwrap();
        let path: Vec<(Vec<usize>, Vec<usize>)> =
            kernels.iter().map(|k| (k.source.clone(), k.target.clone())).collect();
        // A → D → C → B → A
        assert_eq!(path, vec![(vec![0], vec![3]), (vec![3], vec![2]), (vec![2], vec![1]), (vec![1], vec![0])]);
        let h = holonomy_matrix(&g, &c, &o).unwrap();
        assert_eq!(h.matrix.row_strings(), vec!["01", "10"]);
        assert!(!is_trivial(&h.matrix));
        let (g, c) = worked_cycle(false);
        assert!(is_trivial(&holonomy_matrix(&g, &c, &o).unwrap().matrix));
    }

    #[test]
    fn uniform_cycle_is_all_ones() {
        let mut b = FactorGraph::<f64>::builder(Semiring::SumProduct);
        let v: Vec<usize> = (0..4).map(|_| b.variable(3)).collect();
        for i in 0..4 {
            b.factor(&[v[i], v[(i + 1) % 4]], vec![1.0; 9]);
        }
        let g = b.build().unwrap();
        let n = build_factor_nerve(&g);
        let bb = crate::nerve::backbone(&n, Default::default());
        let c = fundamental_cycle(&n, &bb, bb.chords[0]).unwrap();
        let h = holonomy_matrix(&g, &c, &HolonomyOptions::default()).unwrap();
        assert_eq!(h.matrix, BoolMatrix::ones(3, 3));
        // Enumerate interface paths s_e → s_0 → … → s_e' with every hop supported.
        let k = c.len();
        let supported = |f: usize, a: &[usize], sa: usize, b: &[usize], sb: usize| {
            let scope = g.scope(f);
            (0..9).any(|i| {
                let st = [i / 3, i % 3];
                let at = |v: usize| st[scope.iter().position(|&w| w == v).unwrap()];
                at(a[0]) == sa && at(b[0]) == sb && g.factor(f).table[i] != 0.0
            })
        };
        for x in 0..3 {
            for y in 0..3 {
                let mut reach = vec![x];
                for i in 0..k {
                    let src = if i == 0 { &c.interfaces[k - 1] } else { &c.interfaces[i - 1] };
                    reach = (0..3)
                        .filter(|&t| reach.iter().any(|&s| supported(c.factors[i], src, s, &c.interfaces[i], t)))
                        .collect();
                }
                assert_eq!(reach.contains(&y), h.matrix.get(x, y));
            }
        }
    }

    #[test]
    fn quotient_examples() {
        let swap = mode_quotient(&BoolMatrix::from_rows(&["01", "10"]));
        assert_eq!(swap.modes, vec![vec![0, 1]]);
        assert_eq!(swap.fixed_point, vec![false, false]);
        let id = mode_quotient(&BoolMatrix::identity(2));
        assert_eq!(id.modes, vec![vec![0], vec![1]]);
        assert_eq!(id.q, vec![0, 1]);
        let zero = mode_quotient(&BoolMatrix::zeros(3, 3));
        assert_eq!(zero.modes, vec![vec![0], vec![1], vec![2]]);
        assert!(zero.fixed_point.iter().all(|&b| !b));
    }

    #[test]
    fn triviality() {
        assert!(is_trivial(&BoolMatrix::identity(2)));
        assert!(!is_trivial(&BoolMatrix::from_rows(&["01", "10"])));
        assert!(!is_trivial(&BoolMatrix::from_rows(&["11", "01"])));
    }

    #[test]
    fn interface_cap_is_enforced() {
        let g = four_cycle::<f64>(true);
        let o = HolonomyOptions { cap: 1, ..Default::default() };
        assert!(matches!(transport_kernel(&g, 0, &[0], &[1], &o), Err(HolonomyError::InterfaceTooLarge { .. })));
    }

    #[test]
    fn dominant_policy_extracts_permutation() {
        let mut b = FactorGraph::<f64>::builder(Semiring::SumProduct);
        let (x, y) = (b.variable(2), b.variable(2));
        b.factor(&[x, y], vec![0.1, 0.9, 0.9, 0.1]);
        let g = b.build().unwrap();
        let full = transport_kernel(&g, 0, &[x], &[y], &HolonomyOptions::default()).unwrap();
        assert_eq!(full.matrix, BoolMatrix::ones(2, 2));
        let o = HolonomyOptions { policy: SupportPolicy::Dominant { rel_tol: 1e-9 }, ..Default::default() };
        let dom = transport_kernel(&g, 0, &[x], &[y], &o).unwrap();
        assert_eq!(dom.matrix, BoolMatrix::from_rows(&["01", "10"]));
    }

    #[test]
    fn wide_rows_multiply() {
        let n = 130;
        let mut shift = BoolMatrix::zeros(n, n);
        for i in 0..n {
            shift.set(i, (i + 1) % n);
        }
        let mut acc = BoolMatrix::identity(n);
        for _ in 0..n {
            acc = acc.mul(&shift);
        }
        assert!(acc.is_identity());
        assert!(shift.is_permutation());
        assert_eq!(shift.transpose().mul(&shift), BoolMatrix::identity(n));
    }

    fn bool_matrix(n: usize) -> impl Strategy<Value = BoolMatrix> {
        prop::collection::vec(any::<bool>(), n * n).prop_map(move |b| {
            let mut m = BoolMatrix::zeros(n, n);
            for (k, &x) in b.iter().enumerate() {
                if x {
                    m.set(k / n, k % n);
                }
            }
            m
        })
    }

    fn closure(m: &BoolMatrix) -> BoolMatrix {
        let n = m.rows();
        let mut r = m.or(&BoolMatrix::identity(n));
        loop {
            let next = r.or(&r.mul(&r));
            if next == r {
                return r;
            }
            r = next;
        }
    }

    proptest! {
        #[test]
        fn product_is_associative(a in bool_matrix(5), b in bool_matrix(5), c in bool_matrix(5)) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn quotient_is_mutual_reachability(m in bool_matrix(8)) {
            let q = mode_quotient(&m);
            let r = closure(&m);
            let mut seen = [false; 8];
            for mode in &q.modes {
                for &x in mode {
                    prop_assert!(!seen[x]);
                    seen[x] = true;
                }
            }
            for x in 0..8 {
                for y in 0..8 {
                    prop_assert_eq!(q.q[x] == q.q[y], r.get(x, y) && r.get(y, x));
                }
            }
        }

        #[test]
        fn kernel_matches_restricted_support(table in prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..2.0], 12)) {
            let mut b = FactorGraph::<f64>::builder(Semiring::SumProduct);
            let (x, y, z) = (b.variable(2), b.variable(3), b.variable(2));
            b.factor(&[x, y, z], table);
            let g = b.build().unwrap();
            for (u, v) in [(vec![x], vec![z]), (vec![x, y], vec![y]), (vec![z], vec![x, y])] {
                let k = transport_kernel(&g, 0, &u, &v, &HolonomyOptions::default()).unwrap();
                let mut uv: Vec<usize> = u.iter().chain(&v).copied().collect();
                uv.sort_unstable();
                uv.dedup();
                let r: PotentialSlice<f64> = g.slice(0).restrict(&uv, Semiring::SumProduct).unwrap();
                let mut odo = Odometer::new(&r.cards);
                let mut i = 0;
                while let Some(s) = odo.current() {
                    let pick = |vars: &[usize]| vars.iter().fold(0, |acc, w| {
                        let p = r.position(*w).unwrap();
                        acc * r.cards[p] + s[p]
                    });
                    prop_assert_eq!(k.matrix.get(pick(&u), pick(&v)), r.table[i] != 0.0);
                    i += 1;
                    odo.advance();
                }
            }
        }
    }
}
