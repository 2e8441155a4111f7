//! Degree-distribution and local-structure statistics reported per graph
//! configuration: fill, triangles per node, power-law exponent and relative
//! edge distribution entropy.

use crate::graph::{degree_vector, Graph};
use crate::{CoreError, Result};

/// One statistics row for a graph.
///
/// `gamma` is `f64::INFINITY` for regular graphs, where the estimator's
/// denominator vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    pub mean_degree: f64,
    pub fill: f64,
    pub triangles_per_node: f64,
    pub gamma: f64,
    pub entropy: f64,
}

/// Probability that a uniformly chosen node pair is an edge: `2m / n(n-1)`.
pub fn fill(g: &Graph) -> Result<f64> {
    let n = g.node_count();
    if n < 2 {
        return Err(CoreError::GraphTooSmall {
            what: "nodes",
            min: 2,
            got: n,
        });
    }
    Ok(2.0 * g.edge_count() as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// Number of distinct triangles divided by the node count.
///
/// Each triangle `i < j < k` is counted exactly once by intersecting the
/// sorted neighbor lists of the endpoints of every edge `(i, j)` and keeping
/// common neighbors above `j`.
pub fn triangle_density(g: &Graph) -> f64 {
    let mut triangles: u64 = 0;
    for i in 0..g.node_count() {
        let ni = g.neighbors(i);
        for &j in ni {
            let j = j as usize;
            if j <= i {
                continue;
            }
            triangles += count_common_above(ni, g.neighbors(j), j as u32);
        }
    }
    triangles as f64 / g.node_count() as f64
}

fn count_common_above(a: &[u32], b: &[u32], floor: u32) -> u64 {
    let mut count = 0;
    let (mut x, mut y) = (a.partition_point(|&v| v <= floor), b.partition_point(|&v| v <= floor));
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    count
}

/// Degree-distribution tail exponent, robust estimator:
/// `gamma = 1 + n' / sum(ln(d_i / d_min))` over the `n'` nodes with positive
/// degree, `d_min` the smallest positive degree. Returns `f64::INFINITY`
/// when all positive degrees are equal.
pub fn power_law_exponent(g: &Graph) -> Result<f64> {
    let degrees = degree_vector(g);
    let d_min = degrees
        .min_positive()
        .ok_or(CoreError::GraphTooSmall {
            what: "edges",
            min: 1,
            got: 0,
        })? as f64;
    let mut log_sum = 0.0;
    let mut positive = 0usize;
    for &d in &degrees.0 {
        if d > 0 {
            positive += 1;
            log_sum += (d as f64 / d_min).ln();
        }
    }
    if log_sum == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 + positive as f64 / log_sum)
}

/// Relative edge distribution entropy,
/// `H_er = (1 / ln n) * sum(-(d_i / 2m) ln(d_i / 2m))`.
/// Zero-degree nodes contribute nothing (the `x ln x -> 0` convention).
/// Equals 1 when every node has the same degree.
pub fn edge_distribution_entropy(g: &Graph) -> Result<f64> {
    let n = g.node_count();
    if n < 2 {
        return Err(CoreError::GraphTooSmall {
            what: "nodes",
            min: 2,
            got: n,
        });
    }
    if g.edge_count() == 0 {
        return Err(CoreError::GraphTooSmall {
            what: "edges",
            min: 1,
            got: 0,
        });
    }
    let two_m = 2.0 * g.edge_count() as f64;
    let mut h = 0.0;
    for i in 0..n {
        let d = g.degree(i);
        if d > 0 {
            let w = d as f64 / two_m;
            h -= w * w.ln();
        }
    }
    Ok(h / (n as f64).ln())
}

/// All statistics of one table row.
pub fn compute_stats(g: &Graph) -> Result<GraphStats> {
    Ok(GraphStats {
        n: g.node_count(),
        m: g.edge_count(),
        mean_degree: 2.0 * g.edge_count() as f64 / g.node_count() as f64,
        fill: fill(g)?,
        triangles_per_node: triangle_density(g),
        gamma: power_law_exponent(g)?,
        entropy: edge_distribution_entropy(g)?,
    })
}
