//! Random-walk corpus generation: unbiased truncated walks when
//! `p = q = 1`, second-order biased walks otherwise.
//!
//! At node `v` having arrived from `t`, a candidate `x` weighs `1/p` if
//! `x = t`, `1` if `x` is adjacent to `t`, and `1/q` otherwise, normalized
//! over the neighbors of `v`. The adjacency test is a binary search on the
//! sorted neighbor list, so one step costs O(deg(v) log deg(t)) and nothing
//! is precomputed per edge.

use grl_core::graph::Graph;
use grl_core::seed;
use rand::RngExt;
use rayon::prelude::*;

/// Walk generation and Skipgram hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Nodes per walk, counting the root.
    pub walk_length: usize,
    pub return_param: f64,
    pub inout_param: f64,
    pub embedding_dim: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 80,
            return_param: 1.0,
            inout_param: 1.0,
            embedding_dim: 128,
            window: 10,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl WalkConfig {
    /// DeepWalk defaults: unbiased walks.
    pub fn deepwalk() -> Self {
        Self::default()
    }

    /// node2vec with the task-specific `(p, q)` the grid uses.
    pub fn node2vec(p: f64, q: f64) -> Self {
        Self {
            return_param: p,
            inout_param: q,
            ..Self::default()
        }
    }
}

/// The multiset of walks fed to Skipgram, grouped by root.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
    pub node_count: usize,
}

/// Exact transition distribution out of `current`, given the previous node.
/// `None` for the first step (uniform over neighbors). Probabilities are
/// returned per neighbor, in neighbor-list order.
pub fn transition_probabilities(
    g: &Graph,
    previous: Option<usize>,
    current: usize,
    return_param: f64,
    inout_param: f64,
) -> Vec<(u32, f64)> {
    let neighbors = g.neighbors(current);
    if neighbors.is_empty() {
        return Vec::new();
    }
    let weights: Vec<f64> = match previous {
        None => vec![1.0; neighbors.len()],
        Some(t) => neighbors
            .iter()
            .map(|&x| {
                let x = x as usize;
                if x == t {
                    1.0 / return_param
                } else if g.has_edge(x, t) {
                    1.0
                } else {
                    1.0 / inout_param
                }
            })
            .collect(),
    };
    let total: f64 = weights.iter().sum();
    neighbors
        .iter()
        .zip(weights)
        .map(|(&x, w)| (x, w / total))
        .collect()
}

fn step(
    g: &Graph,
    previous: Option<usize>,
    current: usize,
    return_param: f64,
    inout_param: f64,
    rng: &mut impl RngExt,
) -> Option<u32> {
    let neighbors = g.neighbors(current);
    if neighbors.is_empty() {
        return None;
    }
    if neighbors.len() == 1 {
        return Some(neighbors[0]);
    }
    let biased = return_param != 1.0 || inout_param != 1.0;
    let t = match previous {
        Some(t) if biased => t,
        // First step, or p = q = 1: uniform over neighbors.
        _ => return Some(neighbors[rng.random_range(0..neighbors.len())]),
    };
    let weights: Vec<f64> = neighbors
        .iter()
        .map(|&x| {
            let x = x as usize;
            if x == t {
                1.0 / return_param
            } else if g.has_edge(x, t) {
                1.0
            } else {
                1.0 / inout_param
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return Some(neighbors[i]);
        }
    }
    Some(*neighbors.last().expect("non-empty"))
}

/// Generate `walks_per_node` walks from every node. Deterministic given the
/// seed: each (root, repeat) pair derives its own stream, so the schedule of
/// the parallel loop cannot reorder randomness.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig, seed: u64) -> WalkCorpus {
    let n = g.node_count();
    let walks: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .flat_map_iter(|root| {
            let root_seed = seed::mix_index(seed, root as u64);
            (0..cfg.walks_per_node).map(move |w| {
                let mut rng = seed::rng(seed::mix_index(root_seed, w as u64));
                let mut walk = Vec::with_capacity(cfg.walk_length);
                walk.push(root as u32);
                let mut previous: Option<usize> = None;
                let mut current = root;
                for _ in 1..cfg.walk_length {
                    match step(g, previous, current, cfg.return_param, cfg.inout_param, &mut rng) {
                        Some(next) => {
                            walk.push(next);
                            previous = Some(current);
                            current = next as usize;
                        }
                        None => break,
                    }
                }
                walk
            })
        })
        .collect();
    WalkCorpus { walks, node_count: n }
}
