//! Sector decomposition on pairwise models: holonomy generators acting on
//! the states of a base variable, their orbits, per-orbit conditioned
//! inference and evidence-weighted recombination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{self, BpOptions};
use crate::compile::{hatcc_infer, HatccOptions, Status};
use crate::factor_graph::{FactorDecl, FactorGraph};
use crate::generators::bfs_tree_mask;
use crate::holonomy::{scc, transport_kernel, BoolMatrix, HolonomyError, HolonomyOptions, SupportPolicy};
use crate::potential::Odometer;
use crate::scalar::Scalar;
use crate::semiring::Semiring;

#[derive(Debug, Error)]
pub enum SectorError {
    #[error("factor {factor} has arity {arity}; sector decomposition needs pairwise factors")]
    NonPairwise { factor: usize, arity: usize },
    #[error("base variable {0} does not exist")]
    UnknownBase(usize),
    #[error("sector decomposition needs the sum-product semiring, got {0}")]
    Semiring(Semiring),
    #[error("strict group orbits need permutation generators; generator {0} is not one")]
    NotInvertible(usize),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
    #[error(transparent)]
    Bp(#[from] bp::BpError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorMode {
    /// Keep off-tree factors; exact when the conditioned model is a forest or
    /// compiles exactly, loopy BP otherwise.
    #[default]
    SectorBp,
    /// Drop off-tree factors and run exact tree inference.
    DecompositionOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitRule {
    /// Mutual reachability under the union of generators.
    #[default]
    Scc,
    /// Components of the symmetrized union; generators must be permutations.
    Group,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorOptions {
    pub mode: SectorMode,
    pub orbit: OrbitRule,
    /// Kernel support used for generators. Dominant entries by default, so
    /// noisy constraints still transport as permutations.
    pub policy: SupportPolicy,
    pub bp: BpOptions,
    /// Try holonomy-aware compilation on loopy sectors first and keep its
    /// answer when it certifies exactness; loopy BP otherwise.
    pub compile_sectors: bool,
}

impl Default for SectorOptions {
    fn default() -> Self {
        SectorOptions {
            mode: SectorMode::default(),
            orbit: OrbitRule::default(),
            policy: SupportPolicy::Dominant { rel_tol: 1e-9 },
            bp: BpOptions::default(),
            compile_sectors: true,
        }
    }
}

fn check_pairwise<T: Scalar>(graph: &FactorGraph<T>) -> Result<(), SectorError> {
    for f in graph.factors() {
        if f.scope.len() > 2 {
            return Err(SectorError::NonPairwise { factor: f.id, arity: f.scope.len() });
        }
    }
    Ok(())
}

/// Highest-degree variable in the pairwise variable graph, ties to the smallest id.
pub fn default_base<T: Scalar>(graph: &FactorGraph<T>) -> usize {
    let mut deg = vec![0usize; graph.num_variables()];
    for f in graph.factors() {
        if f.scope.len() == 2 {
            deg[f.scope[0]] += 1;
            deg[f.scope[1]] += 1;
        }
    }
    (0..deg.len()).fold(0, |best, v| if deg[v] > deg[best] { v } else { best })
}

/// Pairwise factors split into spanning-forest edges and off-tree edges.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableTree {
    pub base: usize,
    pub tree_factors: Vec<usize>,
    pub off_tree_factors: Vec<usize>,
    /// `(parent variable, factor)` per variable; `None` at roots.
    pub parent: Vec<Option<(usize, usize)>>,
}

/// BFS spanning forest of the variable graph, rooted at `base`.
pub fn variable_tree<T: Scalar>(graph: &FactorGraph<T>, base: usize) -> Result<VariableTree, SectorError> {
    check_pairwise(graph)?;
    if base >= graph.num_variables() {
        return Err(SectorError::UnknownBase(base));
    }
    let pairs: Vec<usize> = (0..graph.num_factors()).filter(|&f| graph.scope(f).len() == 2).collect();
    let edges: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&f| {
            let s = graph.scope(f);
            (s[0].min(s[1]), s[0].max(s[1]))
        })
        .collect();
    let mask = bfs_tree_mask(graph.num_variables(), &edges, base);
    let mut tree_factors = Vec::new();
    let mut off_tree_factors = Vec::new();
    for (k, &f) in pairs.iter().enumerate() {
        if mask[k] {
            tree_factors.push(f);
        } else {
            off_tree_factors.push(f);
        }
    }
    // Orient tree edges by BFS from base, then the remaining components.
    let n = graph.num_variables();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &f in &tree_factors {
        let s = graph.scope(f);
        adj[s[0]].push((s[1], f));
        adj[s[1]].push((s[0], f));
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    for start in std::iter::once(base).chain(0..n) {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut q = std::collections::VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            for &(w, f) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, f));
                    q.push_back(w);
                }
            }
        }
    }
    Ok(VariableTree { base, tree_factors, off_tree_factors, parent })
}

/// Kernel transporting states of `b` to states of `v` along the tree path,
/// or `None` when `v` is in another component.
fn path_from_base<T: Scalar>(
    graph: &FactorGraph<T>,
    tree: &VariableTree,
    v: usize,
    opts: &HolonomyOptions,
) -> Result<Option<BoolMatrix>, SectorError> {
    let mut hops = Vec::new();
    let mut cur = v;
    while let Some((p, f)) = tree.parent[cur] {
        hops.push((p, f, cur));
        cur = p;
    }
    if cur != tree.base {
        return Ok(None);
    }
    let mut acc = BoolMatrix::identity(graph.cardinality(tree.base));
    for &(p, f, c) in hops.iter().rev() {
        acc = acc.mul(&transport_kernel(graph, f, &[p], &[c], opts)?.matrix);
    }
    Ok(Some(acc))
}

/// One generator per off-tree factor in the base component: transport from
/// `b` to the factor's first variable, across the factor, and back to `b`.
/// Returns the generating factor ids alongside.
pub fn base_generators<T: Scalar>(
    graph: &FactorGraph<T>,
    tree: &VariableTree,
    policy: SupportPolicy,
) -> Result<(Vec<usize>, Vec<BoolMatrix>), SectorError> {
    let opts = HolonomyOptions { policy, ..Default::default() };
    let mut ids = Vec::new();
    let mut gens = Vec::new();
    for &f in &tree.off_tree_factors {
        let s = graph.scope(f);
        let (i, j) = (s[0], s[1]);
        let Some(to_i) = path_from_base(graph, tree, i, &opts)? else { continue };
        let to_j = path_from_base(graph, tree, j, &opts)?.expect("same component");
        let across = transport_kernel(graph, f, &[i], &[j], &opts)?.matrix;
        gens.push(to_i.mul(&across).mul(&to_j.transpose()));
        ids.push(f);
    }
    Ok((ids, gens))
}

/// Partition of `0..fiber` into orbits, each ascending, ordered by smallest state.
pub fn orbit_partition(
    generators: &[BoolMatrix],
    fiber: usize,
    rule: OrbitRule,
) -> Result<Vec<Vec<usize>>, SectorError> {
    let mut union = BoolMatrix::zeros(fiber, fiber);
    for (i, g) in generators.iter().enumerate() {
        if rule == OrbitRule::Group && !g.is_permutation() {
            return Err(SectorError::NotInvertible(i));
        }
        union = union.or(g);
    }
    if rule == OrbitRule::Group {
        union = union.or(&union.transpose());
    }
    Ok(scc(&union))
}

/// Inference result inside one orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorOutcome {
    pub orbit: Vec<usize>,
    /// `ln Z_ℓ`; `-inf` for an empty sector.
    pub log_z: f64,
    pub marginals: Vec<Vec<f64>>,
    pub exact: bool,
    pub converged: bool,
    pub final_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorResult {
    pub base: usize,
    pub generator_factors: Vec<usize>,
    pub generators: Vec<Vec<String>>,
    pub nontrivial_generators: usize,
    pub orbits: Vec<Vec<usize>>,
    pub sectors: Vec<SectorOutcome>,
    /// `w_ℓ = Z_ℓ / Σ Z`.
    pub weights: Vec<f64>,
    /// `Σ_ℓ w_ℓ p_ℓ`; empty when every evidence vanishes.
    pub marginals: Vec<Vec<f64>>,
    pub unsat: bool,
    pub exact: bool,
}

/// Model with `x_b` restricted to `orbit`. Factors touching `b` are sliced
/// when the orbit is a single state, otherwise a unary indicator is added.
fn conditioned<T: Scalar>(graph: &FactorGraph<T>, keep: &[bool], b: usize, orbit: &[usize]) -> FactorGraph<T> {
    let r = graph.semiring();
    let (_, vars, _) = graph.clone().into_parts();
    let mut factors = Vec::new();
    for f in (0..graph.num_factors()).filter(|&f| keep[f]) {
        let fac = graph.factor(f);
        match (orbit, fac.scope.iter().position(|&v| v == b)) {
            ([s], Some(p)) => {
                let cards = graph.scope_cards(f);
                let mut table = Vec::new();
                let mut odo = Odometer::new(&cards);
                let mut idx = 0;
                while let Some(x) = odo.current() {
                    if x[p] == *s {
                        table.push(fac.table[idx]);
                    }
                    idx += 1;
                    odo.advance();
                }
                let scope = fac.scope.iter().copied().filter(|&v| v != b).collect();
                factors.push(FactorDecl { id: factors.len(), scope, table });
            }
            _ => factors.push(FactorDecl { id: factors.len(), scope: fac.scope.clone(), table: fac.table.clone() }),
        }
    }
    let indicator = (0..graph.cardinality(b)).map(|x| if orbit.contains(&x) { r.one() } else { r.zero() }).collect();
    factors.push(FactorDecl { id: factors.len(), scope: vec![b], table: indicator });
    FactorGraph::new_unchecked(r, vars, factors)
}

fn solve_sector<T: Scalar>(
    graph: &FactorGraph<T>,
    keep: &[bool],
    b: usize,
    orbit: &[usize],
    opts: &SectorOptions,
) -> Result<SectorOutcome, SectorError> {
    let g = conditioned(graph, keep, b, orbit);
    let to_f64 = |m: &[Vec<T>]| m.iter().map(|v| v.iter().map(|x| x.as_f64()).collect()).collect();
    if g.is_forest() {
        let t = bp::tree_two_pass(&g)?;
        let z = t.z.as_f64();
        return Ok(SectorOutcome {
            orbit: orbit.to_vec(),
            log_z: z.ln(),
            marginals: if z > 0.0 { to_f64(&t.beliefs) } else { Vec::new() },
            exact: true,
            converged: true,
            final_residual: 0.0,
        });
    }
    if opts.compile_sectors {
        if let Ok(out) = hatcc_infer(&g, &HatccOptions::default()) {
            if out.status == Status::Unsat || out.diagnostics.exact {
                let z = out.z.as_f64();
                return Ok(SectorOutcome {
                    orbit: orbit.to_vec(),
                    log_z: z.ln(),
                    marginals: if z > 0.0 { to_f64(&out.marginals) } else { Vec::new() },
                    exact: true,
                    converged: true,
                    final_residual: 0.0,
                });
            }
        }
    }
    let res = bp::run(&g, &opts.bp)?;
    let log_z = if res.degenerate.is_empty() { bp::bethe_log_z(&g, &res.messages) } else { f64::NEG_INFINITY };
    Ok(SectorOutcome {
        orbit: orbit.to_vec(),
        log_z,
        marginals: if log_z.is_finite() { to_f64(&res.beliefs) } else { Vec::new() },
        exact: false,
        converged: res.converged,
        final_residual: res.residual_trace.last().map_or(0.0, |r| r.as_f64()),
    })
}

/// Full sector pipeline for base variable `b`.
pub fn sector_infer<T: Scalar>(
    graph: &FactorGraph<T>,
    b: usize,
    opts: &SectorOptions,
) -> Result<SectorResult, SectorError> {
    if graph.semiring() != Semiring::SumProduct {
        return Err(SectorError::Semiring(graph.semiring()));
    }
    let tree = variable_tree(graph, b)?;
    let (generator_factors, gens) = base_generators(graph, &tree, opts.policy)?;
    let fiber = graph.cardinality(b);
    let orbits = orbit_partition(&gens, fiber, opts.orbit)?;
    let mut keep = vec![true; graph.num_factors()];
    if opts.mode == SectorMode::DecompositionOnly {
        for &f in &tree.off_tree_factors {
            keep[f] = false;
        }
    }
    let sectors: Vec<SectorOutcome> =
        orbits.par_iter().map(|o| solve_sector(graph, &keep, b, o, opts)).collect::<Result<_, _>>()?;
    let top = sectors.iter().map(|s| s.log_z).fold(f64::NEG_INFINITY, f64::max);
    let unsat = top == f64::NEG_INFINITY;
    let (weights, marginals) = if unsat {
        (vec![0.0; sectors.len()], Vec::new())
    } else {
        let raw: Vec<f64> = sectors.iter().map(|s| (s.log_z - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut m: Vec<Vec<f64>> = (0..graph.num_variables()).map(|v| vec![0.0; graph.cardinality(v)]).collect();
        for (s, &wl) in sectors.iter().zip(&w) {
            if wl > 0.0 {
                for (acc, p) in m.iter_mut().zip(&s.marginals) {
                    for (a, x) in acc.iter_mut().zip(p) {
                        *a += wl * x;
                    }
                }
            }
        }
        (w, m)
    };
    Ok(SectorResult {
        base: b,
        nontrivial_generators: gens.iter().filter(|g| !g.is_identity()).count(),
        generators: gens.iter().map(BoolMatrix::row_strings).collect(),
        generator_factors,
        orbits,
        exact: sectors.iter().all(|s| s.exact),
        sectors,
        weights,
        marginals,
        unsat,
    })
}
