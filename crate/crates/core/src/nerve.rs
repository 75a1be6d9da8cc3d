//! Factor nerve, spanning-forest backbone, chords and fundamental cycles.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor_graph::{FactorGraph, UnionFind};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NerveError {
    #[error("edge {0} is not a chord of this backbone")]
    NotAChord(usize),
    #[error("factors {0} and {1} lie in different components")]
    DifferentComponents(usize, usize),
    #[error("given tree edges do not form a spanning forest of the nerve")]
    NotSpanningForest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NerveEdge {
    /// Smaller factor id.
    pub a: usize,
    pub b: usize,
    /// Shared variables, ascending.
    pub interface: Vec<usize>,
    /// `Σ_{v ∈ interface} ln |Ω(v)|`.
    pub weight: f64,
}

/// Graph on factors joined whenever their scopes overlap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorNerve {
    pub num_factors: usize,
    /// Sorted by `(a, b)`.
    pub edges: Vec<NerveEdge>,
    /// Per factor: `(neighbor, edge id)` sorted by neighbor.
    pub adjacency: Vec<Vec<(usize, usize)>>,
}

impl FactorNerve {
    pub fn degree(&self, f: usize) -> usize {
        self.adjacency[f].len()
    }

    pub fn edge_between(&self, f: usize, g: usize) -> Option<usize> {
        self.adjacency[f].binary_search_by_key(&g, |&(n, _)| n).ok().map(|i| self.adjacency[f][i].1)
    }

    /// Component index per factor, numbered by smallest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.num_factors);
        for e in &self.edges {
            uf.union(e.a, e.b);
        }
        let mut label = vec![usize::MAX; self.num_factors];
        let mut count = 0;
        let comp = (0..self.num_factors)
            .map(|f| {
                let r = uf.find(f);
                if label[r] == usize::MAX {
                    label[r] = count;
                    count += 1;
                }
                label[r]
            })
            .collect();
        (count, comp)
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// All-pairs overlap scan.
pub fn build_factor_nerve<T: Scalar>(graph: &FactorGraph<T>) -> FactorNerve {
    let n = graph.num_factors();
    let sorted: Vec<Vec<usize>> = (0..n)
        .map(|f| {
            let mut s = graph.scope(f).to_vec();
            s.sort_unstable();
            s
        })
        .collect();
    let row = |a: usize| -> Vec<NerveEdge> {
        ((a + 1)..n)
            .filter_map(|b| {
                let interface = intersect_sorted(&sorted[a], &sorted[b]);
                (!interface.is_empty()).then(|| NerveEdge {
                    a,
                    b,
                    weight: interface.iter().map(|&v| (graph.cardinality(v) as f64).ln()).sum(),
                    interface,
                })
            })
            .collect()
    };
    let edges: Vec<NerveEdge> = if n >= 512 {
        (0..n).into_par_iter().map(row).collect::<Vec<_>>().concat()
    } else {
        (0..n).flat_map(row).collect()
    };
    let mut adjacency = vec![Vec::new(); n];
    for (id, e) in edges.iter().enumerate() {
        adjacency[e.a].push((e.b, id));
        adjacency[e.b].push((e.a, id));
    }
    for a in &mut adjacency {
        a.sort_unstable();
    }
    FactorNerve { num_factors: n, edges, adjacency }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Max,
    /// Ablation: minimum-weight spanning forest.
    Min,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootRule {
    /// Highest nerve degree, ties to the smallest id.
    #[default]
    MaxDegree,
    /// Smallest factor id.
    LexFirst,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneOptions {
    pub objective: Objective,
    pub root: RootRule,
}

/// Spanning forest of the nerve plus the complementary chords.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub tree_edges: Vec<usize>,
    pub chords: Vec<usize>,
    /// One root per component, in component order.
    pub roots: Vec<usize>,
    /// `(parent factor, nerve edge)`; `None` at roots.
    pub parent: Vec<Option<(usize, usize)>>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    pub component: Vec<usize>,
    /// Factors in BFS order (parents before children).
    pub order: Vec<usize>,
}

impl Backbone {
    pub fn num_components(&self) -> usize {
        self.roots.len()
    }

    /// Roots a given set of tree edges. Fails unless they span every
    /// component without cycles.
    pub fn from_tree_edges(nerve: &FactorNerve, tree_edges: &[usize], rule: RootRule) -> Result<Self, NerveError> {
        let (count, comp) = nerve.components();
        let mut uf = UnionFind::new(nerve.num_factors);
        for &e in tree_edges {
            let edge = nerve.edges.get(e).ok_or(NerveError::NotSpanningForest)?;
            if !uf.union(edge.a, edge.b) {
                return Err(NerveError::NotSpanningForest);
            }
        }
        if tree_edges.len() != nerve.num_factors - count {
            return Err(NerveError::NotSpanningForest);
        }
        let mut in_tree = vec![false; nerve.edges.len()];
        for &e in tree_edges {
            in_tree[e] = true;
        }
        let mut roots = vec![usize::MAX; count];
        for (f, &c) in comp.iter().enumerate() {
            let better = match rule {
                RootRule::LexFirst => roots[c] == usize::MAX,
                RootRule::MaxDegree => roots[c] == usize::MAX || nerve.degree(f) > nerve.degree(roots[c]),
            };
            if better {
                roots[c] = f;
            }
        }
        let n = nerve.num_factors;
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for &r in &roots {
            seen[r] = true;
            let mut q = VecDeque::from([r]);
            while let Some(u) = q.pop_front() {
                order.push(u);
                for &(w, e) in &nerve.adjacency[u] {
                    if in_tree[e] && !seen[w] {
                        seen[w] = true;
                        parent[w] = Some((u, e));
                        depth[w] = depth[u] + 1;
                        children[u].push(w);
                        q.push_back(w);
                    }
                }
            }
        }
        let mut tree: Vec<usize> = tree_edges.to_vec();
        tree.sort_unstable();
        let chords = (0..nerve.edges.len()).filter(|&e| !in_tree[e]).collect();
        Ok(Backbone { tree_edges: tree, chords, roots, parent, children, depth, component: comp, order })
    }
}

/// Kruskal spanning forest; equal weights prefer the lexicographically
/// smaller `(a, b)`.
pub fn backbone(nerve: &FactorNerve, opts: BackboneOptions) -> Backbone {
    let mut ids: Vec<usize> = (0..nerve.edges.len()).collect();
    ids.sort_by(|&x, &y| {
        let (wx, wy) = (nerve.edges[x].weight, nerve.edges[y].weight);
        let ord = match opts.objective {
            Objective::Max => wy.total_cmp(&wx),
            Objective::Min => wx.total_cmp(&wy),
        };
        ord.then(x.cmp(&y))
    });
    let mut uf = UnionFind::new(nerve.num_factors);
    let tree: Vec<usize> = ids.into_iter().filter(|&e| uf.union(nerve.edges[e].a, nerve.edges[e].b)).collect();
    Backbone::from_tree_edges(nerve, &tree, opts.root).expect("Kruskal yields a spanning forest")
}

/// Cycle closed by a chord: factors `f_0, …, f_k` where `f_0 … f_k` is the
/// tree path and `(f_k, f_0)` is the chord; `interfaces[i]` is shared by
/// `f_i` and `f_{i+1}`, the last one being the chord interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalCycle {
    pub chord: usize,
    pub factors: Vec<usize>,
    pub interfaces: Vec<Vec<usize>>,
}

impl FundamentalCycle {
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn chord_interface(&self) -> &[usize] {
        self.interfaces.last().expect("cycles are nonempty")
    }
}

/// Fundamental cycle of `chord`, starting at its higher-id endpoint.
pub fn fundamental_cycle(nerve: &FactorNerve, bb: &Backbone, chord: usize) -> Result<FundamentalCycle, NerveError> {
    let e = nerve.edges.get(chord).ok_or(NerveError::NotAChord(chord))?;
    if bb.chords.binary_search(&chord).is_err() {
        return Err(NerveError::NotAChord(chord));
    }
    let (u, v) = (e.b, e.a);
    if bb.component[u] != bb.component[v] {
        return Err(NerveError::DifferentComponents(u, v));
    }
    let (mut x, mut y) = (u, v);
    let mut from_u = vec![u];
    let mut from_v = vec![v];
    while x != y {
        if bb.depth[x] >= bb.depth[y] {
            x = bb.parent[x].expect("non-root above lca").0;
            from_u.push(x);
        } else {
            y = bb.parent[y].expect("non-root above lca").0;
            from_v.push(y);
        }
    }
    from_v.pop();
    from_u.extend(from_v.into_iter().rev());
    let factors = from_u;
    let k = factors.len();
    let interfaces = (0..k)
        .map(|i| {
            if i + 1 == k {
                e.interface.clone()
            } else {
                let t = nerve.edge_between(factors[i], factors[i + 1]).expect("tree path edge");
                nerve.edges[t].interface.clone()
            }
        })
        .collect();
    Ok(FundamentalCycle { chord, factors, interfaces })
}

/// DOT rendering: tree edges solid, chords dashed, labeled by interface.
pub fn to_dot<T: Scalar>(graph: &FactorGraph<T>, nerve: &FactorNerve, bb: &Backbone) -> String {
    let label = |v: usize| graph.variables()[v].label.clone().unwrap_or_else(|| format!("x{v}"));
    let mut s = String::from("graph nerve {\n  node [shape=box];\n");
    for f in 0..nerve.num_factors {
        let shape = if bb.roots.contains(&f) { ", peripheries=2" } else { "" };
        let _ = writeln!(s, "  f{f} [label=\"f{f}\"{shape}];");
    }
    for (id, e) in nerve.edges.iter().enumerate() {
        let style = if bb.chords.binary_search(&id).is_ok() { "dashed" } else { "solid" };
        let iface: Vec<String> = e.interface.iter().map(|&v| label(v)).collect();
        let _ = writeln!(s, "  f{} -- f{} [style={style}, label=\"{}\"];", e.a, e.b, iface.join(","));
    }
    s.push_str("}\n");
    s
}
