//! Seeded instance generators.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`, with one stream per instance component:
//! stream 0 draws topology, 1 the ground truth, 2 shifts and corruptions,
//! 3 potential values.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor_graph::FactorGraph;
use crate::scalar::Scalar;
use crate::semiring::Semiring;

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_TRUTH: u64 = 1;
const STREAM_SHIFTS: u64 = 2;
const STREAM_POTENTIALS: u64 = 3;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Cycle {
        n: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
    /// Random recursive spanning tree plus Erdős–Rényi edges with probability `p`.
    Random {
        n: usize,
        p: f64,
    },
    /// Random recursive tree.
    Tree {
        n: usize,
    },
    Chain {
        n: usize,
    },
}

impl Topology {
    /// Variable count and undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self, seed: u64) -> Result<(usize, Vec<(usize, usize)>), GenError> {
        let mut rng = stream(seed, STREAM_TOPOLOGY);
        let bad = |m: &str| Err(GenError::InvalidParameter(m.to_string()));
        Ok(match *self {
            Topology::Cycle { n } => {
                if n < 3 {
                    return bad("cycle needs n >= 3");
                }
                let mut e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
                e.push((0, n - 1));
                (n, e)
            }
            Topology::Chain { n } => {
                if n < 1 {
                    return bad("chain needs n >= 1");
                }
                (n, (1..n).map(|i| (i - 1, i)).collect())
            }
            Topology::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return bad("grid needs positive dimensions");
                }
                let mut e = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let v = r * cols + c;
                        if c + 1 < cols {
                            e.push((v, v + 1));
                        }
                        if r + 1 < rows {
                            e.push((v, v + cols));
                        }
                    }
                }
                (rows * cols, e)
            }
            Topology::Tree { n } => {
                if n < 1 {
                    return bad("tree needs n >= 1");
                }
                (n, (1..n).map(|i| (rng.gen_range(0..i), i)).collect())
            }
            Topology::Random { n, p } => {
                if n < 1 || !(0.0..=1.0).contains(&p) {
                    return bad("random graph needs n >= 1 and p in [0, 1]");
                }
                let tree: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
                let mut e = tree.clone();
                for j in 1..n {
                    for i in 0..j {
                        if !tree.contains(&(i, j)) && rng.gen_bool(p) {
                            e.push((i, j));
                        }
                    }
                }
                e.sort_unstable();
                (n, e)
            }
        })
    }
}

/// BFS spanning forest over `n` vertices; `true` marks tree edges. Neighbors
/// are visited in ascending id order, components rooted at their smallest
/// vertex, except that `root` is explored first.
pub fn bfs_tree_mask(n: usize, edges: &[(usize, usize)], root: usize) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        adj[i].push((j, k));
        adj[j].push((i, k));
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut seen = vec![false; n];
    let mut mask = vec![false; edges.len()];
    for start in std::iter::once(root).chain(0..n) {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            for &(w, k) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    mask[k] = true;
                    q.push_back(w);
                }
            }
        }
    }
    mask
}

/// Ground-truth sidecar written next to generated instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub family: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub corrupted_edges: Vec<(usize, usize)>,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct Instance<T> {
    pub graph: FactorGraph<T>,
    pub truth: GroundTruth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZkParams {
    pub k: usize,
    /// Uniform mixing weight; `0` gives deterministic shift constraints.
    pub eta: f64,
    pub epsilon: f64,
}

/// ℤ_k synchronization: `ψ_ij(x_i, x_j) = (1−η)·[x_j ≡ x_i + g_ij] + η/k` on
/// scope `(i, j)`, with `g_ij = x*_j − x*_i` and a fraction `ε` of off-tree
/// edges shifted by a random nonzero amount.
pub fn zk_sync<T: Scalar>(topology: Topology, p: ZkParams, seed: u64) -> Result<Instance<T>, GenError> {
    if p.k < 2 {
        return Err(GenError::InvalidParameter("k must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&p.eta) {
        return Err(GenError::InvalidParameter("eta must be in [0, 1)".into()));
    }
    if !(0.0..=1.0).contains(&p.epsilon) {
        return Err(GenError::InvalidParameter("epsilon must be in [0, 1]".into()));
    }
    let (n, edges) = topology.edges(seed)?;
    let mut truth_rng = stream(seed, STREAM_TRUTH);
    let truth: Vec<usize> = (0..n).map(|_| truth_rng.gen_range(0..p.k)).collect();
    let mut shifts: Vec<usize> = edges.iter().map(|&(i, j)| (truth[j] + p.k - truth[i]) % p.k).collect();

    let mask = bfs_tree_mask(n, &edges, 0);
    let mut off: Vec<usize> = (0..edges.len()).filter(|&k| !mask[k]).collect();
    let count = (p.epsilon * off.len() as f64).ceil() as usize;
    let mut shift_rng = stream(seed, STREAM_SHIFTS);
    off.shuffle(&mut shift_rng);
    let mut corrupted: Vec<usize> = off[..count.min(off.len())].to_vec();
    for &k in &corrupted {
        shifts[k] = (shifts[k] + shift_rng.gen_range(1..p.k)) % p.k;
    }
    corrupted.sort_unstable();

    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..n {
        b.variable(p.k);
    }
    let hit = T::lit(1.0 - p.eta + p.eta / p.k as f64);
    let miss = T::lit(p.eta / p.k as f64);
    for (&(i, j), &g) in edges.iter().zip(&shifts) {
        b.factor_fn(&[i, j], |s| if s[1] == (s[0] + g) % p.k { hit } else { miss });
    }
    let graph = b.build().map_err(|e| GenError::InvalidParameter(e.to_string()))?;
    Ok(Instance {
        graph,
        truth: GroundTruth {
            family: "zk".into(),
            seed,
            truth: Some(truth),
            corrupted_edges: corrupted.iter().map(|&k| edges[k]).collect(),
            edges,
            params: serde_json::json!({ "topology": topology, "k": p.k, "eta": p.eta, "epsilon": p.epsilon }),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Independent uniformly random permutation per edge.
    Random,
    /// `φ_ij = σ_j ∘ σ_i⁻¹` for hidden labelings σ: every cycle composes to identity.
    Consistent,
    Identity,
    /// Fixed-point-free cyclic shift by one (the XOR constraint when d = 2).
    Shift,
}

/// Permutation factor graph: `ψ_ij(x_i, x_j) = (1−noise)·[x_j = φ_ij(x_i)] + noise/d`.
pub fn permutation_graph<T: Scalar>(
    topology: Topology,
    domain: usize,
    noise: f64,
    mode: PermutationMode,
    seed: u64,
) -> Result<Instance<T>, GenError> {
    if domain < 2 {
        return Err(GenError::InvalidParameter("domain size must be >= 2".into()));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(GenError::InvalidParameter("noise must be in [0, 1]".into()));
    }
    let (n, edges) = topology.edges(seed)?;
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let random_perm = |rng: &mut ChaCha8Rng| {
        let mut p: Vec<usize> = (0..domain).collect();
        p.shuffle(rng);
        p
    };
    let labels: Vec<Vec<usize>> = (0..n).map(|_| random_perm(&mut rng)).collect();
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..n {
        b.variable(domain);
    }
    let hit = T::lit(1.0 - noise + noise / domain as f64);
    let miss = T::lit(noise / domain as f64);
    for &(i, j) in &edges {
        let phi: Vec<usize> = match mode {
            PermutationMode::Random => random_perm(&mut rng),
            PermutationMode::Identity => (0..domain).collect(),
            PermutationMode::Shift => (0..domain).map(|x| (x + 1) % domain).collect(),
            PermutationMode::Consistent => {
                let mut inv_i = vec![0; domain];
                for (x, &y) in labels[i].iter().enumerate() {
                    inv_i[y] = x;
                }
                (0..domain).map(|y| labels[j][inv_i[y]]).collect()
            }
        };
        b.factor_fn(&[i, j], |s| if s[1] == phi[s[0]] { hit } else { miss });
    }
    let graph = b.build().map_err(|e| GenError::InvalidParameter(e.to_string()))?;
    let truth = (mode == PermutationMode::Consistent).then(|| labels.iter().map(|l| l[0]).collect());
    Ok(Instance {
        graph,
        truth: GroundTruth {
            family: "permutation".into(),
            seed,
            truth,
            edges,
            corrupted_edges: Vec::new(),
            params: serde_json::json!({ "topology": topology, "domain": domain, "noise": noise, "mode": mode }),
        },
    })
}

/// Binary grid MRF with agreement potentials `[[c, 1], [1, c]]` and, when
/// `field > 0`, unary factors `[e^h, e^−h]` with `h ~ U(−field, field)`.
pub fn grid_mrf<T: Scalar>(rows: usize, cols: usize, coupling: f64, field: f64, seed: u64) -> FactorGraph<T> {
    let (n, edges) = Topology::Grid { rows, cols }.edges(seed).expect("positive grid");
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..n {
        b.variable(2);
    }
    let c = T::lit(coupling);
    for &(i, j) in &edges {
        b.factor(&[i, j], vec![c, T::one(), T::one(), c]);
    }
    if field > 0.0 {
        for v in 0..n {
            let h: f64 = rng.gen_range(-field..field);
            b.factor(&[v], vec![T::lit(h.exp()), T::lit((-h).exp())]);
        }
    }
    b.build().expect("grid is well formed")
}

/// Four binary variables A, B, C, D (ids 0–3) with constraints
/// `f1(A,B): B = A`, `f2(B,C): C = B`, `f3(C,D): D = ¬C` (or `D = C` when
/// even) and `f4(D,A): A = D`.
pub fn four_cycle<T: Scalar>(odd: bool) -> FactorGraph<T> {
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    let [a, bb, c, d] = ["A", "B", "C", "D"].map(|l| b.labeled_variable(2, Some(l)));
    let copy = vec![T::one(), T::zero(), T::zero(), T::one()];
    let not = vec![T::zero(), T::one(), T::one(), T::zero()];
    b.factor(&[a, bb], copy.clone());
    b.factor(&[bb, c], copy.clone());
    b.factor(&[c, d], if odd { not } else { copy.clone() });
    b.factor(&[d, a], copy);
    b.build().expect("four-cycle is well formed")
}

fn positive_table<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.gen_range(0.1..2.0))).collect()
}

/// Random recursive tree over `n` variables with positive pairwise tables and
/// a unary factor on roughly half of the variables.
pub fn random_tree<T: Scalar>(n: usize, card: usize, seed: u64) -> FactorGraph<T> {
    let (_, edges) = Topology::Tree { n }.edges(seed).expect("n >= 1");
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..n {
        b.variable(card);
    }
    for &(i, j) in &edges {
        b.factor(&[i, j], positive_table(&mut rng, card * card));
    }
    for v in 0..n {
        if n == 1 || rng.gen_bool(0.5) {
            b.factor(&[v], positive_table(&mut rng, card));
        }
    }
    b.build().expect("tree is well formed")
}

/// Tree-shaped model whose factor nerve is also a tree: `n` variables, each
/// in at most two factors. Factors form a random recursive tree, every tree
/// edge gets its own shared variable and the rest are private to one factor.
pub fn random_factor_tree<T: Scalar>(n: usize, card: usize, seed: u64) -> FactorGraph<T> {
    assert!(n >= 1, "need at least one variable");
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let nf = rng.gen_range(1..=n);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut scopes: Vec<Vec<usize>> = vec![Vec::new(); nf];
    let mut next = ids.into_iter();
    for f in 1..nf {
        let v = next.next().expect("enough variables");
        scopes[rng.gen_range(0..f)].push(v);
        scopes[f].push(v);
    }
    for v in next {
        scopes[rng.gen_range(0..nf)].push(v);
    }
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..n {
        b.variable(card);
    }
    for mut scope in scopes {
        scope.shuffle(&mut rng);
        let size = card.pow(scope.len() as u32);
        b.factor(&scope, positive_table(&mut rng, size));
    }
    b.build().expect("factor tree is well formed")
}

/// Loopy model with `n` variables, `n + 2` positive factors of arity 1–3 and
/// shuffled scope orders.
pub fn random_factor_graph<T: Scalar>(n: usize, card: usize, seed: u64) -> FactorGraph<T> {
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=card.max(2))).collect();
    for &c in &cards {
        b.variable(c);
    }
    let ids: Vec<usize> = (0..n).collect();
    for _ in 0..n + 2 {
        let arity = rng.gen_range(1..=3.min(n));
        let scope: Vec<usize> = ids.choose_multiple(&mut rng, arity).copied().collect();
        let size: usize = scope.iter().map(|&v| cards[v]).product();
        b.factor(&scope, positive_table(&mut rng, size));
    }
    b.build().expect("random graph is well formed")
}

/// Chain of `n` binary pairwise factors over `n + 1` variables plus one
/// factor tying the two ends together.
pub fn chain_with_chord<T: Scalar>(n: usize, seed: u64) -> FactorGraph<T> {
    let mut rng = stream(seed, STREAM_POTENTIALS);
    let mut b = FactorGraph::builder(Semiring::SumProduct);
    for _ in 0..=n {
        b.variable(2);
    }
    for i in 0..n {
        b.factor(&[i, i + 1], positive_table(&mut rng, 4));
    }
    b.factor(&[0, n], positive_table(&mut rng, 4));
    b.build().expect("chain is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_tree_has_tree_nerve() {
        for seed in 0..50 {
            let g = random_factor_tree::<f64>(1 + seed as usize % 12, 2, seed);
            let nerve = crate::nerve::build_factor_nerve(&g);
            assert!(g.is_forest());
            assert_eq!(nerve.edges.len(), g.num_factors() - 1);
            assert!((0..g.num_variables()).all(|v| g.variable_factors(v).count() <= 2));
        }
    }

    #[test]
    fn zk_tables_follow_formula() {
        let inst = zk_sync::<f64>(Topology::Cycle { n: 5 }, ZkParams { k: 3, eta: 0.3, epsilon: 0.0 }, 4).unwrap();
        let t = inst.truth.truth.clone().unwrap();
        let f = inst.graph.factor(0);
        let (i, j) = (f.scope[0], f.scope[1]);
        let g = (t[j] + 3 - t[i]) % 3;
        for xi in 0..3 {
            for xj in 0..3 {
                let want = if xj == (xi + g) % 3 { 0.7 + 0.1 } else { 0.1 };
                assert!((f.table[xi * 3 + xj] - want).abs() < 1e-15);
            }
        }
        // Ground truth has weight on every factor's preferred entry.
        assert!(inst.graph.joint_weight(&t).unwrap() > 0.8f64.powi(5) - 1e-12);
    }

    #[test]
    fn zk_corruption_count() {
        let p = ZkParams { k: 2, eta: 0.1, epsilon: 0.5 };
        let inst = zk_sync::<f64>(Topology::Grid { rows: 3, cols: 3 }, p, 9).unwrap();
        // 12 edges, 8 tree edges, 4 off-tree, ceil(0.5*4) = 2.
        assert_eq!(inst.truth.corrupted_edges.len(), 2);
        let tri = zk_sync::<f64>(Topology::Cycle { n: 3 }, ZkParams { epsilon: 1.0, ..p }, 1).unwrap();
        assert_eq!(tri.truth.corrupted_edges.len(), 1);
    }

    #[test]
    fn zk_rejects_bad_params() {
        let t = Topology::Cycle { n: 4 };
        assert!(zk_sync::<f64>(t, ZkParams { k: 1, eta: 0.1, epsilon: 0.0 }, 0).is_err());
        assert!(zk_sync::<f64>(t, ZkParams { k: 2, eta: 1.0, epsilon: 0.0 }, 0).is_err());
        assert!(zk_sync::<f64>(t, ZkParams { k: 2, eta: 0.1, epsilon: 1.5 }, 0).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let t = Topology::Random { n: 9, p: 0.3 };
        let p = ZkParams { k: 3, eta: 0.2, epsilon: 0.5 };
        let a = zk_sync::<f64>(t, p, 77).unwrap();
        let b = zk_sync::<f64>(t, p, 77).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.truth, b.truth);
        let c = permutation_graph::<f64>(t, 3, 0.1, PermutationMode::Random, 5).unwrap();
        let d = permutation_graph::<f64>(t, 3, 0.1, PermutationMode::Random, 5).unwrap();
        assert_eq!(c.graph, d.graph);
    }

    #[test]
    fn random_topology_is_connected() {
        for seed in 0..20 {
            let (n, e) = Topology::Random { n: 10, p: 0.2 }.edges(seed).unwrap();
            let mask = bfs_tree_mask(n, &e, 0);
            assert_eq!(mask.iter().filter(|&&m| m).count(), n - 1);
        }
    }

    #[test]
    fn permutation_noise_one_is_full_support() {
        let inst = permutation_graph::<f64>(Topology::Cycle { n: 4 }, 3, 1.0, PermutationMode::Random, 2).unwrap();
        assert!(inst.graph.factors().iter().all(|f| f.table.iter().all(|&x| x > 0.0)));
    }

    #[test]
    fn grid_shapes() {
        let g = grid_mrf::<f64>(1, 5, 2.0, 0.0, 0);
        assert_eq!(g.num_factors(), 4);
        assert!(g.is_forest());
        let g = grid_mrf::<f64>(2, 2, 2.0, 0.0, 0);
        assert_eq!(g.num_factors(), 4);
        let u = grid_mrf::<f64>(2, 3, 1.0, 0.0, 0);
        let o = crate::oracle::exact_marginals(&u).unwrap();
        assert!(o.marginals.iter().flatten().all(|&p| (p - 0.5).abs() < 1e-15));
    }

    #[test]
    fn chain_with_chord_shape() {
        let g = chain_with_chord::<f64>(10, 0);
        assert_eq!((g.num_variables(), g.num_factors()), (11, 11));
    }
}
