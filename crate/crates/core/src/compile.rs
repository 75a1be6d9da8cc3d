//! Compilation of chord holonomy into mode variables and selector factors,
//! cluster-tree propagation on the augmented model, and the end-to-end
//! pipeline.
//!
//! The augmented cluster tree has one cluster per original factor and per
//! selector. Its edges are the backbone tree edges plus one edge per chord,
//! joining the selector to the chord's starting factor with the chord
//! interface as separator, so it stays a forest.
//!
//! Propagation over that forest is exact inference on the model in which
//! every variable is split into one copy per connected group of clusters
//! containing it. That coincides with the original model when running
//! intersection holds, or when no chord holonomy has an off-diagonal entry,
//! since every supported configuration then forces the copies to agree.
//! Both conditions are reported in [`Diagnostics`].

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp;
use crate::error::GraphError;
use crate::factor_graph::{FactorDecl, FactorGraph, UnionFind, VariableDecl};
use crate::holonomy::{
    cycle_kernels, mode_quotient, ChordHolonomy, ChordReport, HolonomyError, HolonomyMatrix, HolonomyOptions,
    ModeQuotient,
};
use crate::nerve::{backbone, build_factor_nerve, fundamental_cycle, Backbone, BackboneOptions, FactorNerve};
use crate::potential::{state_count, Odometer, PotentialSlice};
use crate::scalar::Scalar;
use crate::semiring::Semiring;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cover violates coverage: {0}")]
    Coverage(String),
}

/// Indicator `σ(x, m) = [q(x) = m ∧ H(x, x) = 1]` over the chord interface
/// followed by the mode variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Selector<T> {
    pub chord: usize,
    pub interface: Vec<usize>,
    pub mode_var: usize,
    pub num_modes: usize,
    pub table: Vec<T>,
}

/// Proof of infeasibility: a chord whose selector has empty support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsatCertificate {
    pub chord: usize,
    pub factors: (usize, usize),
    pub interface: Vec<usize>,
    pub holonomy_rows: Vec<String>,
    pub selector_table: Vec<f64>,
}

/// Builds the selector for one chord, or the UNSAT certificate when no
/// interface state is a holonomy fixed point.
pub fn build_selector<T: Scalar>(
    semiring: Semiring,
    holonomy: &HolonomyMatrix,
    quotient: &ModeQuotient,
    mode_var: usize,
    chord_factors: (usize, usize),
) -> Result<Selector<T>, UnsatCertificate> {
    let nq = quotient.num_modes();
    let nx = holonomy.matrix.rows();
    let mut table = vec![semiring.zero::<T>(); nx * nq];
    for x in 0..nx {
        if quotient.fixed_point[x] {
            table[x * nq + quotient.q[x]] = semiring.one();
        }
    }
    if table.iter().all(|&t| semiring.is_zero(t)) {
        return Err(UnsatCertificate {
            chord: holonomy.chord,
            factors: chord_factors,
            interface: holonomy.interface.clone(),
            holonomy_rows: holonomy.matrix.row_strings(),
            selector_table: table.iter().map(|t| t.as_f64()).collect(),
        });
    }
    Ok(Selector { chord: holonomy.chord, interface: holonomy.interface.clone(), mode_var, num_modes: nq, table })
}

/// Edge of the augmented cluster forest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterEdge {
    pub a: usize,
    pub b: usize,
    pub separator: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CompiledModel<T> {
    /// Original variables and factors followed by mode variables and selectors.
    pub graph: FactorGraph<T>,
    pub original_vars: usize,
    pub original_factors: usize,
    /// `(chord, mode variable, selector factor)`.
    pub modes: Vec<(usize, usize, usize)>,
    pub edges: Vec<ClusterEdge>,
    /// One root cluster per component.
    pub roots: Vec<usize>,
}

impl<T: Scalar> CompiledModel<T> {
    pub fn num_clusters(&self) -> usize {
        self.graph.num_factors()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_clusters()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.a].push((e.b, i));
            adj[e.b].push((e.a, i));
        }
        adj
    }

    /// Number of connected components of the cluster graph.
    pub fn num_components(&self) -> usize {
        let mut uf = UnionFind::new(self.num_clusters());
        let mut comps = self.num_clusters();
        for e in &self.edges {
            if uf.union(e.a, e.b) {
                comps -= 1;
            }
        }
        comps
    }

    /// Edges equal clusters minus components, and no edge closes a cycle.
    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.num_clusters());
        self.edges.iter().all(|e| uf.union(e.a, e.b))
    }

    /// Variables whose containing clusters do not form a connected subtree.
    pub fn running_intersection_violations(&self) -> Vec<usize> {
        let n = self.graph.num_variables();
        let mut out = Vec::new();
        for v in 0..n {
            let holders: Vec<usize> = self.graph.variable_factors(v).collect();
            if holders.len() < 2 {
                continue;
            }
            let mut uf = UnionFind::new(self.num_clusters());
            let mut joined = 0;
            for e in &self.edges {
                if e.separator.binary_search(&v).is_ok() && uf.union(e.a, e.b) {
                    joined += 1;
                }
            }
            if joined + 1 != holders.len() {
                out.push(v);
            }
        }
        out
    }
}

/// Appends one mode variable and selector per chord and wires the cluster forest.
pub fn augment<T: Scalar>(
    graph: &FactorGraph<T>,
    nerve: &FactorNerve,
    bb: &Backbone,
    chords: &[ChordHolonomy],
) -> Result<CompiledModel<T>, UnsatCertificate> {
    let r = graph.semiring();
    let (_, mut vars, mut factors) = graph.clone().into_parts();
    let (nv, nf) = (vars.len(), factors.len());
    let mut modes = Vec::with_capacity(chords.len());
    let mut edges: Vec<ClusterEdge> = bb
        .tree_edges
        .iter()
        .map(|&e| {
            let ne = &nerve.edges[e];
            ClusterEdge { a: ne.a, b: ne.b, separator: ne.interface.clone() }
        })
        .collect();
    for ch in chords {
        let e = &nerve.edges[ch.cycle.chord];
        let mode_var = vars.len();
        let sel = build_selector::<T>(r, &ch.holonomy, &ch.quotient, mode_var, (e.a, e.b))?;
        vars.push(VariableDecl {
            id: mode_var,
            cardinality: sel.num_modes,
            label: Some(format!("mode{}", ch.cycle.chord)),
        });
        let fid = factors.len();
        let mut scope = sel.interface.clone();
        scope.push(mode_var);
        factors.push(FactorDecl { id: fid, scope, table: sel.table });
        edges.push(ClusterEdge { a: ch.cycle.factors[0], b: fid, separator: sel.interface });
        modes.push((ch.cycle.chord, mode_var, fid));
    }
    let aug = FactorGraph::new_unchecked(r, vars, factors).with_zero_tolerance(graph.zero_tolerance());
    Ok(CompiledModel { graph: aug, original_vars: nv, original_factors: nf, modes, edges, roots: bb.roots.clone() })
}

/// Calibrated cluster beliefs.
#[derive(Clone, Debug)]
pub struct ClusterBeliefs<T> {
    pub beliefs: Vec<PotentialSlice<T>>,
    /// ⊕-total of the model, combined across components.
    pub z: T,
}

/// Two-pass separator message passing over the cluster forest.
pub fn cluster_tree_propagate<T: Scalar>(model: &CompiledModel<T>) -> Result<ClusterBeliefs<T>, GraphError> {
    let g = &model.graph;
    let r = g.semiring();
    let n = model.num_clusters();
    let adj = model.adjacency();
    // BFS order per component, roots first.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut comp_roots = Vec::new();
    for start in model.roots.iter().copied().chain(0..n) {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        comp_roots.push(start);
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(w, e) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, e));
                    order.push(w);
                }
            }
        }
    }
    // msgs[e] = (toward b, toward a)
    let mut msgs: Vec<[Option<PotentialSlice<T>>; 2]> = vec![[None, None]; model.edges.len()];
    let dir = |e: usize, to: usize| usize::from(model.edges[e].a == to);
    let send = |from: usize,
                skip: usize,
                msgs: &Vec<[Option<PotentialSlice<T>>; 2]>|
     -> Result<PotentialSlice<T>, GraphError> {
        let mut t = g.slice(from);
        for &(_, e) in &adj[from] {
            if e != skip {
                if let Some(m) = &msgs[e][dir(e, from)] {
                    t.absorb(m, r)?;
                }
            }
        }
        t.restrict(&model.edges[skip].separator, r)
    };
    for &c in order.iter().rev() {
        if let Some((p, e)) = parent[c] {
            let m = send(c, e, &msgs)?;
            msgs[e][dir(e, p)] = Some(m);
        }
    }
    for &c in &order {
        if let Some((p, e)) = parent[c] {
            let m = send(p, e, &msgs)?;
            msgs[e][dir(e, c)] = Some(m);
        }
    }
    let mut beliefs = Vec::with_capacity(n);
    for c in 0..n {
        let mut t = g.slice(c);
        for &(_, e) in &adj[c] {
            t.absorb(msgs[e][dir(e, c)].as_ref().expect("two passes fill every message"), r)?;
        }
        beliefs.push(t);
    }
    let mut z = r.one::<T>();
    for &root in &comp_roots {
        z = r.mul(z, beliefs[root].total(r));
    }
    for v in 0..g.num_variables() {
        if g.variable_edges(v).is_empty() {
            z = r.mul(z, r.sum(std::iter::repeat_n(r.one::<T>(), g.cardinality(v))));
        }
    }
    Ok(ClusterBeliefs { beliefs, z })
}

/// Largest separator disagreement between adjacent cluster beliefs.
pub fn calibration_error<T: Scalar>(model: &CompiledModel<T>, cb: &ClusterBeliefs<T>) -> Result<T, GraphError> {
    let r = model.graph.semiring();
    let mut worst = T::zero();
    for e in &model.edges {
        let x = cb.beliefs[e.a].restrict(&e.separator, r)?;
        let y = cb.beliefs[e.b].restrict(&e.separator, r)?;
        worst = worst.max(x.max_abs_diff(&y)?);
    }
    Ok(worst)
}

/// Per original variable: restriction of the lowest-id containing cluster,
/// normalized. Variables in no cluster get the uniform marginal.
pub fn marginalize_modes<T: Scalar>(
    model: &CompiledModel<T>,
    cb: &ClusterBeliefs<T>,
) -> Result<Vec<Vec<T>>, GraphError> {
    let g = &model.graph;
    let r = g.semiring();
    (0..model.original_vars)
        .map(|v| {
            let card = g.cardinality(v);
            match g.variable_factors(v).min() {
                None => {
                    let mut u = vec![r.one::<T>(); card];
                    r.normalize(&mut u);
                    Ok(u)
                }
                Some(c) => {
                    let mut m = cb.beliefs[c].restrict(&[v], r)?.table;
                    r.normalize(&mut m);
                    Ok(m)
                }
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HatccOptions {
    pub backbone: BackboneOptions,
    pub holonomy: HolonomyOptions,
    /// Skip the tree fast path even when the model is a forest.
    pub force_cluster: bool,
}

/// Wall time per phase in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub nerve: f64,
    pub backbone: f64,
    pub holonomy: f64,
    pub quotient: f64,
    pub augment: f64,
    pub propagate: f64,
    pub marginalize: f64,
}

impl PhaseTimings {
    /// Phases up to and including augmentation.
    pub fn compile_total(&self) -> f64 {
        self.nerve + self.backbone + self.holonomy + self.quotient + self.augment
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub running_intersection: bool,
    pub violating_variables: Vec<usize>,
    /// No chord holonomy has an off-diagonal entry.
    pub holonomy_certified: bool,
    /// Result is guaranteed to equal exact inference.
    pub exact: bool,
    pub tree_fast_path: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Unsat,
}

#[derive(Clone, Debug)]
pub struct HatccOutput<T> {
    pub status: Status,
    pub z: T,
    /// Empty when unsatisfiable.
    pub marginals: Vec<Vec<T>>,
    pub chords: Vec<ChordReport>,
    pub certificate: Option<UnsatCertificate>,
    pub diagnostics: Diagnostics,
    pub timings: PhaseTimings,
    pub compiled: Option<CompiledModel<T>>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Nerve, backbone, chord holonomies and the augmented model (or a certificate).
pub type Compiled<T> = (FactorNerve, Backbone, Vec<ChordHolonomy>, Result<CompiledModel<T>, UnsatCertificate>);

/// Phases 1–5: nerve, backbone, holonomy, quotients, augmentation.
pub fn compile<T: Scalar>(
    graph: &FactorGraph<T>,
    opts: &HatccOptions,
    timings: &mut PhaseTimings,
) -> Result<Compiled<T>, CompileError> {
    use rayon::prelude::*;
    let t = Instant::now();
    let nerve = build_factor_nerve(graph);
    timings.nerve = ms(t);

    let t = Instant::now();
    let bb = backbone(&nerve, opts.backbone);
    timings.backbone = ms(t);

    let t = Instant::now();
    let hol: Vec<(crate::nerve::FundamentalCycle, HolonomyMatrix)> = bb
        .chords
        .par_iter()
        .map(|&c| -> Result<_, HolonomyError> {
            let cycle = fundamental_cycle(&nerve, &bb, c)?;
            let kernels = cycle_kernels(graph, &cycle, &opts.holonomy)?;
            let matrix = kernels.iter().skip(1).fold(kernels[0].matrix.clone(), |acc, k| acc.mul(&k.matrix));
            let h = HolonomyMatrix { chord: c, interface: cycle.chord_interface().to_vec(), matrix };
            Ok((cycle, h))
        })
        .collect::<Result<_, _>>()?;
    timings.holonomy = ms(t);

    let t = Instant::now();
    let chords: Vec<ChordHolonomy> = hol
        .into_iter()
        .map(|(cycle, holonomy)| {
            let quotient = mode_quotient(&holonomy.matrix);
            ChordHolonomy { cycle, holonomy, quotient }
        })
        .collect();
    timings.quotient = ms(t);

    let t = Instant::now();
    let model = augment(graph, &nerve, &bb, &chords);
    timings.augment = ms(t);
    Ok((nerve, bb, chords, model))
}

/// The full pipeline. A forest-shaped model without chords goes straight to
/// two-pass tree propagation.
pub fn hatcc_infer<T: Scalar>(graph: &FactorGraph<T>, opts: &HatccOptions) -> Result<HatccOutput<T>, CompileError> {
    let r = graph.semiring();
    let mut timings = PhaseTimings::default();
    let (nerve, _bb, chords, model) = compile(graph, opts, &mut timings)?;
    let reports: Vec<ChordReport> = chords.iter().map(|c| c.report(&nerve)).collect();
    let holonomy_certified = chords.iter().all(|c| {
        let m = &c.holonomy.matrix;
        (0..m.rows()).all(|i| m.row_ones(i).all(|j| j == i))
    });
    let model = match model {
        Ok(m) => m,
        Err(cert) => {
            return Ok(HatccOutput {
                status: Status::Unsat,
                z: r.zero(),
                marginals: Vec::new(),
                chords: reports,
                certificate: Some(cert),
                diagnostics: Diagnostics { holonomy_certified, exact: true, ..Default::default() },
                timings,
                compiled: None,
            })
        }
    };
    debug_assert!(model.is_forest());

    if chords.is_empty() && !opts.force_cluster && graph.is_forest() {
        let t = Instant::now();
        let tree = bp::tree_two_pass(graph).expect("forest checked");
        timings.propagate = ms(t);
        let unsat = r.is_zero(tree.z);
        return Ok(HatccOutput {
            status: if unsat { Status::Unsat } else { Status::Ok },
            z: tree.z,
            marginals: if unsat { Vec::new() } else { tree.beliefs },
            chords: reports,
            certificate: None,
            diagnostics: Diagnostics {
                running_intersection: true,
                holonomy_certified: true,
                exact: true,
                tree_fast_path: true,
                ..Default::default()
            },
            timings,
            compiled: Some(model),
        });
    }

    let violating = model.running_intersection_violations();
    let running_intersection = violating.is_empty();
    let exact = running_intersection || holonomy_certified;
    let mut warnings = Vec::new();
    if !exact {
        warnings.push(format!(
            "running intersection fails for variables {violating:?} and some chord holonomy mixes states; \
             marginals are not guaranteed exact"
        ));
    }
    let diagnostics = Diagnostics {
        running_intersection,
        violating_variables: violating,
        holonomy_certified,
        exact,
        tree_fast_path: false,
        warnings,
    };

    let t = Instant::now();
    let cb = cluster_tree_propagate(&model)?;
    timings.propagate = ms(t);
    if r.is_zero(cb.z) {
        return Ok(HatccOutput {
            status: Status::Unsat,
            z: cb.z,
            marginals: Vec::new(),
            chords: reports,
            certificate: None,
            diagnostics,
            timings,
            compiled: Some(model),
        });
    }
    let t = Instant::now();
    let marginals = marginalize_modes(&model, &cb)?;
    timings.marginalize = ms(t);
    Ok(HatccOutput {
        status: Status::Ok,
        z: cb.z,
        marginals,
        chords: reports,
        certificate: None,
        diagnostics,
        timings,
        compiled: Some(model),
    })
}

/// Per-overlap comparison of a descent datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapCheck {
    pub i: usize,
    pub j: usize,
    pub overlap: Vec<usize>,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub overlaps: Vec<OverlapCheck>,
    pub max_discrepancy: f64,
    pub compatible: bool,
}

/// Checks that local tables agree on every nonempty pairwise overlap of the
/// cover. The cover must contain every variable and every factor scope.
pub fn check_descent_datum<T: Scalar>(
    graph: &FactorGraph<T>,
    tables: &[PotentialSlice<T>],
    tol: f64,
) -> Result<DescentReport, CompileError> {
    let sets: Vec<Vec<usize>> = tables
        .iter()
        .map(|t| {
            let mut s = t.scope.clone();
            s.sort_unstable();
            s
        })
        .collect();
    for v in 0..graph.num_variables() {
        if !sets.iter().any(|s| s.binary_search(&v).is_ok()) {
            return Err(CompileError::Coverage(format!("variable {v} lies in no piece")));
        }
        if let Some(t) = tables.iter().find(|t| t.cardinality_of(v).is_some_and(|c| c != graph.cardinality(v))) {
            return Err(CompileError::Coverage(format!("piece over {:?} has wrong cardinality for {v}", t.scope)));
        }
    }
    if let Some(v) = sets.iter().flatten().find(|&&v| v >= graph.num_variables()) {
        return Err(CompileError::Coverage(format!("piece references unknown variable {v}")));
    }
    for f in 0..graph.num_factors() {
        if !sets.iter().any(|s| graph.scope(f).iter().all(|v| s.binary_search(v).is_ok())) {
            return Err(CompileError::Coverage(format!("factor {f} fits in no piece")));
        }
    }
    let r = graph.semiring();
    let mut overlaps = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let overlap: Vec<usize> = sets[i].iter().copied().filter(|v| sets[j].binary_search(v).is_ok()).collect();
            if overlap.is_empty() {
                continue;
            }
            let a = tables[i].restrict(&overlap, r)?;
            let b = tables[j].restrict(&overlap, r)?;
            overlaps.push(OverlapCheck { i, j, overlap, discrepancy: a.max_abs_diff(&b)?.as_f64() });
        }
    }
    let max_discrepancy = overlaps.iter().map(|o| o.discrepancy).fold(0.0, f64::max);
    Ok(DescentReport { overlaps, max_discrepancy, compatible: max_discrepancy < tol })
}

/// Restrictions of one global table to each piece of a cover.
pub fn restrict_to_cover<T: Scalar>(
    global: &PotentialSlice<T>,
    cover: &[Vec<usize>],
    semiring: Semiring,
) -> Result<Vec<PotentialSlice<T>>, GraphError> {
    cover.iter().map(|piece| global.restrict(piece, semiring)).collect()
}

/// Joint table of a graph over all variables in id order.
pub fn joint_table<T: Scalar>(graph: &FactorGraph<T>) -> Result<PotentialSlice<T>, GraphError> {
    let cards = graph.cardinalities();
    let n = state_count(&cards).ok_or(GraphError::StateSpaceOverflow)?;
    let mut table = Vec::with_capacity(n);
    let mut odo = Odometer::new(&cards);
    while let Some(x) = odo.current() {
        table.push(graph.joint_weight_unchecked(x));
        odo.advance();
    }
    Ok(PotentialSlice { scope: (0..cards.len()).collect(), cards, table })
}

/// Point-mass local beliefs on the factor scopes of a cycle, obtained by
/// transporting an interface state around the cycle to a *different* state.
/// Adjacent tree pieces agree but the chord overlap does not. `None` when the
/// holonomy has no off-diagonal entry.
pub fn chord_counterexample<T: Scalar>(
    graph: &FactorGraph<T>,
    chord: &ChordHolonomy,
    opts: &HolonomyOptions,
) -> Result<Option<Vec<PotentialSlice<T>>>, CompileError> {
    let cyc = &chord.cycle;
    let k = cyc.len();
    let h = &chord.holonomy.matrix;
    let Some((x0, y0)) = (0..h.rows()).find_map(|x| h.row_ones(x).find(|&y| y != x).map(|y| (x, y))) else {
        return Ok(None);
    };
    let r = graph.semiring();
    let mask_of = |f: usize| opts.policy.mask(r, &graph.factor(f).table);
    let idx_in = |f: usize, s: &[usize], vars: &[usize]| {
        let scope = graph.scope(f);
        vars.iter().fold(0, |acc, v| {
            let p = scope.iter().position(|w| w == v).expect("interface in scope");
            acc * graph.cardinality(*v) + s[p]
        })
    };
    // layers[i]: reachable outgoing interface state -> (incoming state, full assignment of f_i)
    let mut frontier: Vec<usize> = vec![x0];
    let mut layers: Vec<std::collections::BTreeMap<usize, (usize, Vec<usize>)>> = Vec::with_capacity(k);
    for i in 0..k {
        let f = cyc.factors[i];
        let src = if i == 0 { &cyc.interfaces[k - 1] } else { &cyc.interfaces[i - 1] };
        let dst = &cyc.interfaces[i];
        let mask = mask_of(f);
        let mut layer = std::collections::BTreeMap::new();
        let mut odo = Odometer::new(&graph.scope_cards(f));
        let mut idx = 0;
        while let Some(s) = odo.current() {
            if mask[idx] {
                let a = idx_in(f, s, src);
                if frontier.contains(&a) {
                    layer.entry(idx_in(f, s, dst)).or_insert((a, s.to_vec()));
                }
            }
            idx += 1;
            odo.advance();
        }
        frontier = layer.keys().copied().collect();
        layers.push(layer);
    }
    let mut state = y0;
    let mut picks = vec![Vec::new(); k];
    for i in (0..k).rev() {
        let (prev, s) = layers[i].get(&state).expect("holonomy entry has a witness").clone();
        picks[i] = s;
        state = prev;
    }
    debug_assert_eq!(state, x0);
    Ok(Some(
        cyc.factors
            .iter()
            .zip(&picks)
            .map(|(&f, s)| {
                let mut t = PotentialSlice::filled(graph.scope(f).to_vec(), graph.scope_cards(f), r.zero::<T>());
                let i = idx_in(f, s, graph.scope(f));
                t.table[i] = r.one();
                t
            })
            .collect(),
    ))
}

/// Sequential gluing of probability tables: `F ← F · B / ρ(B)` where `ρ(B)`
/// is `B` restricted to the variables already glued, with `0/0 = 0`. The
/// result is over the ascending union scope.
pub fn glue<T: Scalar>(pieces: &[PotentialSlice<T>], order: &[usize]) -> Result<PotentialSlice<T>, GraphError> {
    let r = Semiring::SumProduct;
    let mut it = order.iter();
    let first = *it.next().expect("at least one piece");
    let mut acc = pieces[first].clone();
    for &i in it {
        let b = &pieces[i];
        let shared: Vec<usize> = b.scope.iter().copied().filter(|v| acc.position(*v).is_some()).collect();
        let rho = b.restrict(&shared, r)?;
        let mut cond = b.clone();
        let rb = rho.broadcast_to(&b.scope, &b.cards)?;
        for (c, &d) in cond.table.iter_mut().zip(&rb.table) {
            *c = if d == T::zero() { T::zero() } else { *c / d };
        }
        acc = acc.product(&cond, r)?;
    }
    let mut all = acc.scope.clone();
    all.sort_unstable();
    acc.marginalize_to(&all, r)
}
