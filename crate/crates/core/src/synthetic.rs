//! Synthetic desk-scale datasets: preferential-attachment graphs with
//! class-structured Gaussian features, and seeded Erdős–Rényi graphs for
//! statistical fixtures.

use rand::RngExt;

use crate::data::{Dataset, LabelVector};
use crate::graph::{build_graph, Graph};
use crate::matrix::DenseMatrix;
use crate::seed;
use crate::Result;

/// Recipe for a synthetic dataset. Generation is a pure function of the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub node_count: usize,
    /// Edges each new node attaches with, degree-proportionally.
    pub attachment_degree: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Distance of each class's feature mean from the origin; 0 means the
    /// features carry no class signal at all.
    pub intra_class_feature_shift: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) {
        assert!(self.attachment_degree >= 1, "attachment_degree must be >= 1");
        assert!(
            self.node_count > self.attachment_degree,
            "node_count must exceed attachment_degree"
        );
        assert!(self.num_classes >= 2, "need at least two classes");
    }
}

/// Standard normal via Box–Muller; two uniforms per draw keeps the stream
/// layout independent of call parity.
fn gaussian(rng: &mut impl RngExt) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Preferential-attachment graph: a complete seed clique of
/// `attachment_degree + 1` nodes, then each new node draws
/// `attachment_degree` distinct targets with probability proportional to
/// current degree.
pub fn preferential_attachment(node_count: usize, attachment_degree: usize, seed: u64) -> Result<Graph> {
    let m0 = attachment_degree;
    let mut rng = seed::rng(seed);
    let mut edges: Vec<(u64, u64)> = Vec::with_capacity(node_count * m0);
    // Repeated-endpoints list: sampling an index uniformly from it is a
    // degree-proportional draw.
    let mut endpoints: Vec<u64> = Vec::with_capacity(2 * node_count * m0);
    for i in 0..=(m0 as u64) {
        for j in (i + 1)..=(m0 as u64) {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    for v in (m0 as u64 + 1)..(node_count as u64) {
        let mut targets = Vec::with_capacity(m0);
        while targets.len() < m0 {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((v, t));
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    build_graph(&edges)
}

/// Seeded `G(n, p)` with geometric edge skipping, O(m) regardless of `p`.
pub fn erdos_renyi(node_count: usize, p: f64, seed: u64) -> Result<Graph> {
    assert!((0.0..=1.0).contains(&p), "p must be a probability");
    let mut rng = seed::rng(seed);
    let n = node_count as u64;
    let total_pairs = n * (n - 1) / 2;
    let mut edges = Vec::new();
    if p > 0.0 {
        let log_q = (1.0 - p).ln();
        let mut pos: u64 = 0;
        loop {
            // Geometric gap to the next present pair.
            let gap = if p >= 1.0 {
                0
            } else {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                (u.ln() / log_q).floor() as u64
            };
            pos = match pos.checked_add(gap) {
                Some(next) if next < total_pairs => next,
                _ => break,
            };
            edges.push(pair_from_index(pos, n));
            pos += 1;
            if pos >= total_pairs {
                break;
            }
        }
    }
    // Register every node even if isolated.
    Graph::with_node_count(node_count, &edges)
}

/// Inverse of the row-major enumeration of pairs (i, j), i < j.
fn pair_from_index(index: u64, n: u64) -> (u64, u64) {
    // Row i owns (n - 1 - i) pairs; walk rows arithmetically.
    let mut i = 0u64;
    let mut remaining = index;
    loop {
        let row_len = n - 1 - i;
        if remaining < row_len {
            return (i, i + 1 + remaining);
        }
        remaining -= row_len;
        i += 1;
    }
}

/// Generate a full synthetic dataset per the spec: preferential-attachment
/// structure, block labels by node index, spherical Gaussian features with a
/// per-class mean shift.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate();
    let graph = preferential_attachment(spec.node_count, spec.attachment_degree, seed::mix_str(spec.seed, "graph"))?;
    let n = graph.node_count();
    let k = spec.num_classes;
    let f = spec.feature_dim;

    let labels: Vec<usize> = (0..n).map(|i| (i * k / n).min(k - 1)).collect();
    let labels = LabelVector::new(labels, k)?;

    // One unit direction per class, scaled by the requested shift.
    let mut dir_rng = seed::rng(seed::mix_str(spec.seed, "class-means"));
    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..f).map(|_| gaussian(&mut dir_rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for x in &mut v {
            *x *= spec.intra_class_feature_shift / norm;
        }
        means.push(v);
    }

    let mut feat_rng = seed::rng(seed::mix_str(spec.seed, "features"));
    let mut features = DenseMatrix::zeros(n, f);
    for i in 0..n {
        let mean = &means[labels.labels[i]];
        let row = features.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = mean[j] + gaussian(&mut feat_rng);
        }
    }

    Dataset::new(
        format!("synthetic-{}", spec.seed),
        graph,
        features,
        labels,
    )
}
