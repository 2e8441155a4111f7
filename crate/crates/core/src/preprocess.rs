//! The two degradation preprocessors and train/test split machinery.
//!
//! The sampler draws a client subset and keeps only edges with at least one
//! client endpoint, then prunes nodes left without any edge. The features
//! sampler additionally zeroes a fixed fraction of feature coordinates on
//! every non-client node, leaving client rows untouched.

use rand::seq::SliceRandom;
use rand::RngExt;

use crate::data::{Dataset, LabelVector};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::seed;
use crate::{CoreError, Result};

/// The sampled client subset of a graph's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientMask {
    pub is_client: Vec<bool>,
    pub r_sampling: f64,
}

impl ClientMask {
    pub fn client_count(&self) -> usize {
        self.is_client.iter().filter(|c| **c).count()
    }

    pub fn client_indices(&self) -> Vec<usize> {
        self.is_client
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }
}

/// A degraded dataset together with its re-indexed client mask and the map
/// from each surviving node back to its pre-sampling index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataset {
    pub dataset: Dataset,
    pub client_mask: ClientMask,
    pub provenance: Vec<usize>,
}

/// Draw `round(r_sampling * n)` client nodes uniformly without replacement.
///
/// The draw is a seeded permutation prefix, so for a fixed seed the client
/// sets are nested across increasing ratios.
pub fn sample_clients(g: &Graph, r_sampling: f64, seed: u64) -> Result<ClientMask> {
    if !(r_sampling > 0.0 && r_sampling <= 1.0) {
        return Err(CoreError::InvalidRatio(r_sampling, "(0, 1]"));
    }
    let n = g.node_count();
    let count = (r_sampling * n as f64).round() as usize;
    if count == 0 {
        return Err(CoreError::SamplingRatioTooSmall);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut is_client = vec![false; n];
    for &i in &order[..count.min(n)] {
        is_client[i] = true;
    }
    Ok(ClientMask { is_client, r_sampling })
}

/// Keep edge `(i, j)` iff either endpoint is a client, then drop all
/// degree-zero nodes and re-index everything that is node-aligned.
pub fn apply_sampler(d: &Dataset, mask: &ClientMask) -> Result<SampledDataset> {
    let g = &d.graph;
    if mask.is_client.len() != g.node_count() {
        return Err(CoreError::DimensionMismatch {
            expected: g.node_count(),
            got: mask.is_client.len(),
        });
    }

    let mut kept_edges = Vec::new();
    let mut survives = vec![false; g.node_count()];
    for (i, j) in g.edges() {
        let (i, j) = (i as usize, j as usize);
        if mask.is_client[i] || mask.is_client[j] {
            kept_edges.push((i, j));
            survives[i] = true;
            survives[j] = true;
        }
    }
    if kept_edges.is_empty() {
        return Err(CoreError::EmptySampledGraph);
    }

    let mut new_index = vec![usize::MAX; g.node_count()];
    let mut provenance = Vec::new();
    for (old, &alive) in survives.iter().enumerate() {
        if alive {
            new_index[old] = provenance.len();
            provenance.push(old);
        }
    }
    let n_new = provenance.len();

    let edges: Vec<(u64, u64)> = kept_edges
        .iter()
        .map(|&(i, j)| (new_index[i] as u64, new_index[j] as u64))
        .collect();
    let graph = Graph::with_node_count(n_new, &edges)?;

    let mut features = DenseMatrix::zeros(n_new, d.features.cols());
    let mut labels = Vec::with_capacity(n_new);
    let mut is_client = Vec::with_capacity(n_new);
    for (new, &old) in provenance.iter().enumerate() {
        features.row_mut(new).copy_from_slice(d.features.row(old));
        labels.push(d.labels.labels[old]);
        is_client.push(mask.is_client[old]);
    }

    Ok(SampledDataset {
        dataset: Dataset::new(
            d.name.clone(),
            graph,
            features,
            LabelVector::new(labels, d.labels.num_classes)?,
        )?,
        client_mask: ClientMask {
            is_client,
            r_sampling: mask.r_sampling,
        },
        provenance,
    })
}

/// Zero `round(r_nf_sampling * f)` feature coordinates on every non-client
/// node, re-drawn independently per node; client rows are untouched.
pub fn apply_features_sampler(sd: &SampledDataset, r_nf_sampling: f64, seed: u64) -> Result<SampledDataset> {
    if !(0.0..1.0).contains(&r_nf_sampling) {
        return Err(CoreError::InvalidRatio(r_nf_sampling, "[0, 1)"));
    }
    let mut out = sd.clone();
    let f = out.dataset.features.cols();
    let zeroed = (r_nf_sampling * f as f64).round() as usize;
    if zeroed == 0 {
        return Ok(out);
    }
    for node in 0..out.dataset.graph.node_count() {
        if out.client_mask.is_client[node] {
            continue;
        }
        let mut rng = seed::rng(seed::mix_index(seed, node as u64));
        let mut cols: Vec<usize> = (0..f).collect();
        cols.shuffle(&mut rng);
        let row = out.dataset.features.row_mut(node);
        for &c in &cols[..zeroed] {
            row[c] = 0.0;
        }
    }
    Ok(out)
}

/// Disjoint stratified node partitions for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: within every class, `val_ratio` and `test_ratio` (at
/// least one node each) go to validation and test, the rest to train.
pub fn split_nodes(labels: &LabelVector, ratios: (f64, f64, f64), seed: u64) -> Result<NodeSplit> {
    let (train_ratio, val_ratio, test_ratio) = ratios;
    assert!(
        (train_ratio + val_ratio + test_ratio - 1.0).abs() < 1e-9,
        "split ratios must sum to 1"
    );
    let mut split = NodeSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in labels.class_members().into_iter().enumerate() {
        if members.len() < 3 {
            return Err(CoreError::ClassTooSmall {
                class,
                count: members.len(),
                min: 3,
            });
        }
        members.shuffle(&mut seed::rng(seed::mix_index(seed, class as u64)));
        let c = members.len();
        let n_test = ((test_ratio * c as f64).round() as usize).max(1);
        let n_val = ((val_ratio * c as f64).round() as usize).max(1);
        let (test, rest) = members.split_at(n_test);
        let (val, train) = rest.split_at(n_val.min(rest.len() - 1));
        split.test.extend_from_slice(test);
        split.val.extend_from_slice(val);
        split.train.extend_from_slice(train);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Positive/negative edge partitions for link prediction. Negatives are
/// non-edges of the original graph, disjoint between train and test, one per
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train_pos: Vec<(u32, u32)>,
    pub test_pos: Vec<(u32, u32)>,
    pub train_neg: Vec<(u32, u32)>,
    pub test_neg: Vec<(u32, u32)>,
}

/// Hold out `round(test_fraction * m)` edges as test positives and draw
/// matching negatives for both partitions.
pub fn split_edges(g: &Graph, test_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    let m = g.edge_count();
    let n = g.node_count();
    let non_edges = n * n.saturating_sub(1) / 2 - m;
    // One negative per positive across both partitions.
    if non_edges < m {
        return Err(CoreError::NegativesExhausted {
            requested: m,
            available: non_edges,
        });
    }
    if m < 10 {
        return Err(CoreError::GraphTooSmall {
            what: "edges",
            min: 10,
            got: m,
        });
    }
    let mut edges = g.edges();
    edges.shuffle(&mut seed::rng(seed::mix_str(seed, "edge-split")));
    let n_test = ((test_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let (test_pos, train_pos) = edges.split_at(n_test);

    let test_neg = sample_negative_edges(g, n_test, &[], seed::mix_str(seed, "test-neg"))?;
    let train_neg = sample_negative_edges(g, m - n_test, &test_neg, seed::mix_str(seed, "train-neg"))?;

    Ok(EdgeSplit {
        train_pos: train_pos.to_vec(),
        test_pos: test_pos.to_vec(),
        train_neg,
        test_neg,
    })
}

/// Uniform sample of `count` distinct non-edges, avoiding `exclusions`.
/// Pairs are returned with the smaller endpoint first.
pub fn sample_negative_edges(
    g: &Graph,
    count: usize,
    exclusions: &[(u32, u32)],
    seed: u64,
) -> Result<Vec<(u32, u32)>> {
    let n = g.node_count();
    let population = n * n.saturating_sub(1) / 2 - g.edge_count();
    let excluded: std::collections::HashSet<(u32, u32)> =
        exclusions.iter().map(|&(a, b)| canonical(a, b)).collect();
    if population < count + excluded.len() {
        return Err(CoreError::NegativesExhausted {
            requested: count,
            available: population.saturating_sub(excluded.len()),
        });
    }
    let mut rng = seed::rng(seed);
    let mut drawn = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 100 * count.max(64);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CoreError::NegativesRetriesExceeded { attempts });
        }
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = canonical(i as u32, j as u32);
        if g.has_edge(pair.0 as usize, pair.1 as usize) || excluded.contains(&pair) || drawn.contains(&pair) {
            continue;
        }
        drawn.insert(pair);
        out.push(pair);
    }
    Ok(out)
}

fn canonical(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Remove the test positives from a graph, keeping the node universe. This
/// is the message-passing graph for link-prediction training.
pub fn remove_edges(g: &Graph, removed: &[(u32, u32)]) -> Result<Graph> {
    let removed: std::collections::HashSet<(u32, u32)> =
        removed.iter().map(|&(a, b)| canonical(a, b)).collect();
    let edges: Vec<(u64, u64)> = g
        .edges()
        .into_iter()
        .filter(|&(a, b)| !removed.contains(&canonical(a, b)))
        .map(|(a, b)| (a as u64, b as u64))
        .collect();
    Graph::with_node_count(g.node_count(), &edges)
}

/// Feasibility guard for a degraded configuration: enough surviving nodes
/// and, when classification is involved, enough of every class to split.
pub fn is_feasible_for_classification(sd: &SampledDataset) -> bool {
    sd.dataset.graph.node_count() >= 100
        && sd
            .dataset
            .labels
            .class_members()
            .iter()
            .all(|members| members.len() >= 3)
}

pub fn is_feasible_for_link_prediction(sd: &SampledDataset) -> bool {
    sd.dataset.graph.node_count() >= 100 && sd.dataset.graph.edge_count() >= 10
}
