//! Loopy belief propagation over a semiring, with gauge diagnostics.
//!
//! Messages live on half-edges. Both directions of the incidence between
//! factor `f` and its scope position `p` share the edge id
//! [`FactorGraph::edge_of`]`(f, p)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor_graph::FactorGraph;
use crate::potential::Odometer;
use crate::scalar::Scalar;

/// Edge count above which a parallel step fans out across threads.
const PAR_THRESHOLD: usize = 256;
const OSC_WINDOW: usize = 50;
const OSC_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BpError {
    #[error("variable {variable} is not in the scope of factor {factor}")]
    InvalidHalfEdge { factor: usize, variable: usize },
    #[error("belief at variable {variable} is identically zero")]
    DegenerateBelief { variable: usize },
    #[error("factor graph contains a cycle; two-pass propagation needs a forest")]
    NotForest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    VarToFac,
    FacToVar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfEdge {
    pub factor: usize,
    pub variable: usize,
    pub direction: Direction,
}

impl HalfEdge {
    pub fn var_to_fac(variable: usize, factor: usize) -> Self {
        HalfEdge { factor, variable, direction: Direction::VarToFac }
    }

    pub fn fac_to_var(factor: usize, variable: usize) -> Self {
        HalfEdge { factor, variable, direction: Direction::FacToVar }
    }

    fn edge<T: Scalar>(&self, graph: &FactorGraph<T>) -> Result<usize, BpError> {
        if self.factor >= graph.num_factors() {
            return Err(BpError::InvalidHalfEdge { factor: self.factor, variable: self.variable });
        }
        graph
            .edge_id(self.factor, self.variable)
            .ok_or(BpError::InvalidHalfEdge { factor: self.factor, variable: self.variable })
    }
}

/// One message vector per half-edge, indexed by edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageState<T> {
    pub v2f: Vec<Vec<T>>,
    pub f2v: Vec<Vec<T>>,
}

impl<T: Scalar> MessageState<T> {
    /// All messages equal to the semiring one.
    pub fn uniform(graph: &FactorGraph<T>) -> Self {
        let one = graph.semiring().one::<T>();
        let v: Vec<Vec<T>> = (0..graph.num_edges()).map(|e| vec![one; graph.cardinality(graph.edge(e).1)]).collect();
        MessageState { v2f: v.clone(), f2v: v }
    }

    /// Seeded random messages: entries in `[0.05, 1)` (or `[0, 1)` for
    /// min-sum); Boolean messages are all one.
    pub fn random(graph: &FactorGraph<T>, seed: u64) -> Self {
        use crate::semiring::Semiring::*;
        let r = graph.semiring();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| match r {
                    SumProduct | MaxProduct => T::lit(rng.gen_range(0.05..1.0)),
                    MinSum => T::lit(rng.gen_range(0.0..1.0)),
                    Boolean => T::one(),
                })
                .collect()
        };
        let mut v2f = Vec::with_capacity(graph.num_edges());
        let mut f2v = Vec::with_capacity(graph.num_edges());
        for e in 0..graph.num_edges() {
            let c = graph.cardinality(graph.edge(e).1);
            v2f.push(draw(c));
            f2v.push(draw(c));
        }
        MessageState { v2f, f2v }
    }

    pub fn get(&self, graph: &FactorGraph<T>, h: HalfEdge) -> Result<&[T], BpError> {
        let e = h.edge(graph)?;
        Ok(match h.direction {
            Direction::VarToFac => &self.v2f[e],
            Direction::FacToVar => &self.f2v[e],
        })
    }

    pub fn set(&mut self, graph: &FactorGraph<T>, h: HalfEdge, value: Vec<T>) -> Result<(), BpError> {
        let e = h.edge(graph)?;
        match h.direction {
            Direction::VarToFac => self.v2f[e] = value,
            Direction::FacToVar => self.f2v[e] = value,
        }
        Ok(())
    }

    fn normalize_all(&mut self, graph: &FactorGraph<T>) {
        let r = graph.semiring();
        for m in self.v2f.iter_mut().chain(self.f2v.iter_mut()) {
            r.normalize(m);
        }
    }

    fn normalized(&self, graph: &FactorGraph<T>) -> Self {
        let mut out = self.clone();
        out.normalize_all(graph);
        out
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let pairs = self.v2f.iter().zip(&other.v2f).chain(self.f2v.iter().zip(&other.f2v));
        let mut worst = T::zero();
        for (a, b) in pairs {
            for (&x, &y) in a.iter().zip(b) {
                if x != y {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

/// All half-edges: every variable-to-factor edge, then every factor-to-variable edge.
pub fn half_edges<T: Scalar>(graph: &FactorGraph<T>) -> Vec<HalfEdge> {
    let mut out = Vec::with_capacity(2 * graph.num_edges());
    for dir in [Direction::VarToFac, Direction::FacToVar] {
        for e in 0..graph.num_edges() {
            let (factor, variable, _) = graph.edge(e);
            out.push(HalfEdge { factor, variable, direction: dir });
        }
    }
    out
}

fn var_to_fac_edge<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, e: usize) -> Vec<T> {
    let r = graph.semiring();
    let v = graph.edge(e).1;
    let mut out = vec![r.one::<T>(); graph.cardinality(v)];
    for &g in graph.variable_edges(v) {
        if g != e {
            for (o, &x) in out.iter_mut().zip(&m.f2v[g]) {
                *o = r.mul(*o, x);
            }
        }
    }
    out
}

fn fac_to_var_edge<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, e: usize) -> Vec<T> {
    let r = graph.semiring();
    let (f, v, p) = graph.edge(e);
    let cards = graph.scope_cards(f);
    let table = &graph.factor(f).table;
    let edges = graph.factor_edges(f);
    let mut out = vec![r.zero::<T>(); graph.cardinality(v)];
    let mut odo = Odometer::new(&cards);
    let mut idx = 0;
    while let Some(s) = odo.current() {
        let mut val = table[idx];
        if !r.is_zero(val) {
            for (q, e2) in edges.clone().enumerate() {
                if q != p {
                    val = r.mul(val, m.v2f[e2][s[q]]);
                }
            }
            out[s[p]] = r.add(out[s[p]], val);
        }
        idx += 1;
        odo.advance();
    }
    out
}

/// Variable-to-factor update: ⊙ of incoming factor messages except from `h.factor`.
pub fn update_var_to_fac<T: Scalar>(
    graph: &FactorGraph<T>,
    m: &MessageState<T>,
    h: HalfEdge,
) -> Result<Vec<T>, BpError> {
    Ok(var_to_fac_edge(graph, m, h.edge(graph)?))
}

/// Factor-to-variable update: ⊕-eliminate all other scope variables of
/// `φ_f ⊙ ∏ incoming`.
pub fn update_fac_to_var<T: Scalar>(
    graph: &FactorGraph<T>,
    m: &MessageState<T>,
    h: HalfEdge,
) -> Result<Vec<T>, BpError> {
    Ok(fac_to_var_edge(graph, m, h.edge(graph)?))
}

/// Single-edge update dispatching on direction.
pub fn update<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, h: HalfEdge) -> Result<Vec<T>, BpError> {
    match h.direction {
        Direction::VarToFac => update_var_to_fac(graph, m, h),
        Direction::FacToVar => update_fac_to_var(graph, m, h),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// Weight λ of the old message: `new = (1−λ)·new + λ·old`.
    pub damping: f64,
    pub normalize: bool,
}

impl StepOptions {
    /// No damping, no normalization: the bare operator.
    pub const RAW: StepOptions = StepOptions { damping: 0.0, normalize: false };
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { damping: 0.0, normalize: true }
    }
}

fn damp<T: Scalar>(new: &mut [T], old: &[T], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let l = T::lit(lambda);
    let keep = T::one() - l;
    for (n, &o) in new.iter_mut().zip(old) {
        if n.is_finite() && o.is_finite() {
            *n = keep * *n + l * o;
        }
    }
}

/// Parallel operator: every half-edge recomputed from `m`.
pub fn step_parallel<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, opts: StepOptions) -> MessageState<T> {
    let n = graph.num_edges();
    let (mut v2f, mut f2v): (Vec<Vec<T>>, Vec<Vec<T>>) = if n >= PAR_THRESHOLD {
        (
            (0..n).into_par_iter().map(|e| var_to_fac_edge(graph, m, e)).collect(),
            (0..n).into_par_iter().map(|e| fac_to_var_edge(graph, m, e)).collect(),
        )
    } else {
        ((0..n).map(|e| var_to_fac_edge(graph, m, e)).collect(), (0..n).map(|e| fac_to_var_edge(graph, m, e)).collect())
    };
    for e in 0..n {
        damp(&mut v2f[e], &m.v2f[e], opts.damping);
        damp(&mut f2v[e], &m.f2v[e], opts.damping);
    }
    let mut out = MessageState { v2f, f2v };
    if opts.normalize {
        out.normalize_all(graph);
    }
    out
}

/// Applies single-edge updates in order, each reading the freshest state.
pub fn step_scheduled<T: Scalar>(
    graph: &FactorGraph<T>,
    m: &MessageState<T>,
    schedule: &[HalfEdge],
) -> Result<MessageState<T>, BpError> {
    let mut cur = m.clone();
    for &h in schedule {
        let e = h.edge(graph)?;
        match h.direction {
            Direction::VarToFac => cur.v2f[e] = var_to_fac_edge(graph, &cur, e),
            Direction::FacToVar => cur.f2v[e] = fac_to_var_edge(graph, &cur, e),
        }
    }
    Ok(cur)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    Uniform,
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpOptions {
    pub max_iters: usize,
    pub threshold: f64,
    pub damping: f64,
    /// Sequential sweep order; `None` runs the parallel operator.
    pub schedule: Option<Vec<HalfEdge>>,
    pub init: Init,
    pub normalize: bool,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_iters: 200,
            threshold: 1e-6,
            damping: 0.0,
            schedule: None,
            init: Init::Uniform,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BpResult<T> {
    pub messages: MessageState<T>,
    pub beliefs: Vec<Vec<T>>,
    /// Variables whose belief vanished identically.
    pub degenerate: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub oscillating: bool,
    pub residual_trace: Vec<T>,
}

/// Iterates until the max normalized-message residual drops below the
/// threshold or the budget runs out.
pub fn run<T: Scalar>(graph: &FactorGraph<T>, opts: &BpOptions) -> Result<BpResult<T>, BpError> {
    let mut m = match opts.init {
        Init::Uniform => MessageState::uniform(graph),
        Init::Random { seed } => MessageState::random(graph, seed),
    };
    if let Some(s) = &opts.schedule {
        for h in s {
            h.edge(graph)?;
        }
    }
    let threshold = T::lit(opts.threshold);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev_norm = m.normalized(graph);
    for _ in 0..opts.max_iters {
        let next = match &opts.schedule {
            None => step_parallel(graph, &m, StepOptions { damping: opts.damping, normalize: opts.normalize }),
            Some(s) => {
                let mut out = step_scheduled(graph, &m, s)?;
                for e in 0..graph.num_edges() {
                    damp(&mut out.v2f[e], &m.v2f[e], opts.damping);
                    damp(&mut out.f2v[e], &m.f2v[e], opts.damping);
                }
                if opts.normalize {
                    out.normalize_all(graph);
                }
                out
            }
        };
        let next_norm = if opts.normalize { next.clone() } else { next.normalized(graph) };
        let res = next_norm.max_abs_diff(&prev_norm);
        trace.push(res);
        m = next;
        prev_norm = next_norm;
        if res < threshold {
            converged = true;
            break;
        }
    }
    let oscillating = !converged && is_periodic(&trace, threshold);
    let (beliefs, degenerate) = beliefs_lossy(graph, &m);
    Ok(BpResult {
        messages: m,
        beliefs,
        degenerate,
        iterations: trace.len(),
        converged,
        oscillating,
        residual_trace: trace,
    })
}

/// Periodicity test on the trailing window of a residual trace: some period
/// `p ∈ [2, 10]` with every `|r_t − r_{t+p}| < 1e-8`, and residuals still at
/// or above the threshold.
pub fn is_periodic<T: Scalar>(trace: &[T], threshold: T) -> bool {
    if trace.len() < OSC_WINDOW {
        return false;
    }
    let w = &trace[trace.len() - OSC_WINDOW..];
    if w.iter().any(|&r| r < threshold) {
        return false;
    }
    let tol = T::lit(OSC_TOL);
    (2..=10).any(|p| (0..w.len() - p).all(|i| (w[i] - w[i + p]).abs() < tol))
}

fn raw_belief<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, v: usize) -> Vec<T> {
    let r = graph.semiring();
    let mut b = vec![r.one::<T>(); graph.cardinality(v)];
    for &e in graph.variable_edges(v) {
        for (o, &x) in b.iter_mut().zip(&m.f2v[e]) {
            *o = r.mul(*o, x);
        }
    }
    b
}

/// Normalized beliefs; fails on the first variable whose belief is all zero.
pub fn beliefs<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>) -> Result<Vec<Vec<T>>, BpError> {
    let (b, deg) = beliefs_lossy(graph, m);
    match deg.first() {
        Some(&variable) => Err(BpError::DegenerateBelief { variable }),
        None => Ok(b),
    }
}

/// Normalized beliefs plus the list of degenerate variables (left unnormalized).
pub fn beliefs_lossy<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>) -> (Vec<Vec<T>>, Vec<usize>) {
    let r = graph.semiring();
    let mut degenerate = Vec::new();
    let out = (0..graph.num_variables())
        .map(|v| {
            let mut b = raw_belief(graph, m, v);
            if !r.normalize(&mut b) {
                degenerate.push(v);
            }
            b
        })
        .collect();
    (out, degenerate)
}

/// Bethe estimate of `log Z` from (possibly normalized) sum-product messages.
/// Exact at a fixed point on a forest.
pub fn bethe_log_z<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>) -> f64 {
    let mut acc = 0.0;
    for f in 0..graph.num_factors() {
        let cards = graph.scope_cards(f);
        let edges = graph.factor_edges(f);
        let mut odo = Odometer::new(&cards);
        let mut idx = 0;
        let mut z = 0.0;
        while let Some(s) = odo.current() {
            let mut val = graph.factor(f).table[idx].as_f64();
            for (q, e) in edges.clone().enumerate() {
                val *= m.v2f[e][s[q]].as_f64();
            }
            z += val;
            idx += 1;
            odo.advance();
        }
        acc += z.ln();
    }
    for v in 0..graph.num_variables() {
        let zv: f64 = raw_belief_sum_product(graph, m, v).iter().sum();
        acc += zv.ln();
        for &e in graph.variable_edges(v) {
            let zvf: f64 = m.v2f[e].iter().zip(&m.f2v[e]).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
            acc -= zvf.ln();
        }
    }
    acc
}

fn raw_belief_sum_product<T: Scalar>(graph: &FactorGraph<T>, m: &MessageState<T>, v: usize) -> Vec<f64> {
    let mut b = vec![1.0; graph.cardinality(v)];
    for &e in graph.variable_edges(v) {
        for (o, x) in b.iter_mut().zip(&m.f2v[e]) {
            *o *= x.as_f64();
        }
    }
    b
}

/// Per-half-edge scalars acting on messages by ⊙.
#[derive(Clone, Debug, PartialEq)]
pub struct Gauge<T> {
    pub v2f: Vec<T>,
    pub f2v: Vec<T>,
}

impl<T: Scalar> Gauge<T> {
    pub fn identity(graph: &FactorGraph<T>) -> Self {
        let one = graph.semiring().one::<T>();
        Gauge { v2f: vec![one; graph.num_edges()], f2v: vec![one; graph.num_edges()] }
    }

    /// Seeded gauge with entries in `[lo, hi)`.
    pub fn random(graph: &FactorGraph<T>, seed: u64, lo: f64, hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = graph.num_edges();
        let mut draw = || (0..n).map(|_| T::lit(rng.gen_range(lo..hi))).collect::<Vec<T>>();
        let v2f = draw();
        let f2v = draw();
        Gauge { v2f, f2v }
    }

    /// Pointwise group product.
    pub fn compose(&self, other: &Gauge<T>, graph: &FactorGraph<T>) -> Gauge<T> {
        let r = graph.semiring();
        let mul = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| r.mul(x, y)).collect();
        Gauge { v2f: mul(&self.v2f, &other.v2f), f2v: mul(&self.f2v, &other.f2v) }
    }
}

/// `(k·m)_h = k_h ⊙ m_h`.
pub fn gauge_act<T: Scalar>(graph: &FactorGraph<T>, k: &Gauge<T>, m: &MessageState<T>) -> MessageState<T> {
    let r = graph.semiring();
    let scale = |ks: &[T], ms: &[Vec<T>]| -> Vec<Vec<T>> {
        ks.iter().zip(ms).map(|(&kh, mh)| mh.iter().map(|&x| r.mul(kh, x)).collect()).collect()
    };
    MessageState { v2f: scale(&k.v2f, &m.v2f), f2v: scale(&k.f2v, &m.f2v) }
}

/// Gauge propagation map Θ:
/// `Θ(k)_{v→f} = ∏_{g∋v, g≠f} k_{g→v}` and `Θ(k)_{f→v} = ∏_{u∈f, u≠v} k_{u→f}`.
pub fn gauge_propagate<T: Scalar>(graph: &FactorGraph<T>, k: &Gauge<T>) -> Gauge<T> {
    let r = graph.semiring();
    let n = graph.num_edges();
    let mut v2f = vec![r.one::<T>(); n];
    let mut f2v = vec![r.one::<T>(); n];
    for e in 0..n {
        let (f, v, _) = graph.edge(e);
        for &g in graph.variable_edges(v) {
            if g != e {
                v2f[e] = r.mul(v2f[e], k.f2v[g]);
            }
        }
        for u in graph.factor_edges(f) {
            if u != e {
                f2v[e] = r.mul(f2v[e], k.v2f[u]);
            }
        }
    }
    Gauge { v2f, f2v }
}

/// Two-pass output on a forest.
#[derive(Clone, Debug)]
pub struct TreeBp<T> {
    pub messages: MessageState<T>,
    /// Normalized beliefs (exact marginals, or max-marginals under max-product).
    pub beliefs: Vec<Vec<T>>,
    pub degenerate: Vec<usize>,
    /// ⊕ over all assignments of the joint weight.
    pub z: T,
    pub schedule: Vec<HalfEdge>,
}

/// Leaf-to-root then root-to-leaf schedule over every component of a
/// forest-shaped factor graph. Roots are the smallest variable id of each
/// component.
pub fn tree_schedule<T: Scalar>(graph: &FactorGraph<T>) -> Result<Vec<HalfEdge>, BpError> {
    if !graph.is_forest() {
        return Err(BpError::NotForest);
    }
    let mut up = Vec::new();
    let mut down = Vec::new();
    for (vars, _) in graph.components() {
        let Some(&root) = vars.first() else { continue };
        // BFS over the bipartite tree; record (node, parent edge) in visit order.
        let mut order: Vec<(bool, usize, Option<usize>)> = vec![(true, root, None)];
        let mut seen_f = vec![false; graph.num_factors()];
        let mut i = 0;
        while i < order.len() {
            let (is_var, node, parent) = order[i];
            if is_var {
                for &e in graph.variable_edges(node) {
                    if Some(e) != parent {
                        let f = graph.edge(e).0;
                        seen_f[f] = true;
                        order.push((false, f, Some(e)));
                    }
                }
            } else {
                for e in graph.factor_edges(node) {
                    if Some(e) != parent {
                        order.push((true, graph.edge(e).1, Some(e)));
                    }
                }
            }
            i += 1;
        }
        for &(is_var, _, parent) in order.iter().rev() {
            if let Some(e) = parent {
                let (f, v, _) = graph.edge(e);
                up.push(if is_var { HalfEdge::var_to_fac(v, f) } else { HalfEdge::fac_to_var(f, v) });
            }
        }
        for &(is_var, _, parent) in &order {
            if let Some(e) = parent {
                let (f, v, _) = graph.edge(e);
                down.push(if is_var { HalfEdge::fac_to_var(f, v) } else { HalfEdge::var_to_fac(v, f) });
            }
        }
    }
    up.extend(down);
    Ok(up)
}

/// Exact two-pass propagation on a forest from all-one messages, without
/// normalization, returning beliefs and the partition value.
pub fn tree_two_pass<T: Scalar>(graph: &FactorGraph<T>) -> Result<TreeBp<T>, BpError> {
    let r = graph.semiring();
    let schedule = tree_schedule(graph)?;
    let messages = step_scheduled(graph, &MessageState::uniform(graph), &schedule)?;
    let mut z = r.one::<T>();
    for (vars, factors) in graph.components() {
        match vars.first() {
            Some(&root) => z = r.mul(z, r.sum(raw_belief(graph, &messages, root))),
            None => {
                for f in factors {
                    z = r.mul(z, graph.factor(f).table[0]);
                }
            }
        }
    }
    let (beliefs, degenerate) = beliefs_lossy(graph, &messages);
    Ok(TreeBp { messages, beliefs, degenerate, z, schedule })
}
