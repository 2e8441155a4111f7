//! Undirected simple graph in compressed row form, plus the matrix
//! constructions derived from it (degrees, Laplacian action, symmetrically
//! normalized adjacency with self-loops).

use crate::{CoreError, Result};

/// Immutable undirected simple graph.
///
/// Neighbor lists are stored in one flat array with per-node offsets and are
/// sorted ascending, so edge membership is a binary search and triangle
/// counting is a sorted intersection. No self-loops, no duplicate edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    edge_count: usize,
    original_ids: Vec<u64>,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// The id each compact node index carried in the source data.
    pub fn original_id(&self, i: usize) -> u64 {
        self.original_ids[i]
    }

    /// Edges as `(i, j)` pairs with `i < j`, ascending.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for i in 0..self.node_count() {
            for &j in self.neighbors(i) {
                if (j as usize) > i {
                    out.push((i as u32, j));
                }
            }
        }
        out
    }

    /// Build over a fixed node universe `0..node_count`; ids outside it are
    /// rejected. Self-loops and duplicates are dropped. Nodes with no edges
    /// survive with degree zero — this is the loader path, where the node
    /// set comes from the feature file.
    pub fn with_node_count(node_count: usize, edge_pairs: &[(u64, u64)]) -> Result<Graph> {
        if node_count == 0 {
            return Err(CoreError::EmptyGraph);
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); node_count];
        for &(a, b) in edge_pairs {
            if a == b {
                continue;
            }
            for id in [a, b] {
                if id >= node_count as u64 {
                    return Err(CoreError::NodeOutOfRange {
                        id: id as usize,
                        node_count,
                    });
                }
            }
            adj[a as usize].push(b as u32);
            adj[b as usize].push(a as u32);
        }
        Ok(Self::from_adj(adj, (0..node_count as u64).collect()))
    }

    fn from_adj(mut adj: Vec<Vec<u32>>, original_ids: Vec<u64>) -> Graph {
        let mut half_edges = 0usize;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            half_edges += list.len();
        }
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::with_capacity(half_edges);
        offsets.push(0);
        for list in &adj {
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        debug_assert_eq!(half_edges % 2, 0);
        Graph {
            offsets,
            neighbors,
            edge_count: half_edges / 2,
            original_ids,
        }
    }
}

/// Build a simple undirected graph from a raw edge list.
///
/// Ids may be sparse, duplicated, self-looped or listed in both orientations;
/// they are compacted to `0..n-1` in first-appearance order. Nodes appearing
/// only in dropped self-loops are excluded.
pub fn build_graph(edge_pairs: &[(u64, u64)]) -> Result<Graph> {
    let mut index_of = std::collections::HashMap::new();
    let mut original_ids = Vec::new();
    let mut compact = Vec::with_capacity(edge_pairs.len());
    for &(a, b) in edge_pairs {
        if a == b {
            continue;
        }
        let mut idx = |id: u64| -> u32 {
            *index_of.entry(id).or_insert_with(|| {
                original_ids.push(id);
                (original_ids.len() - 1) as u32
            })
        };
        let ia = idx(a);
        let ib = idx(b);
        compact.push((ia, ib));
    }
    if original_ids.is_empty() {
        return Err(CoreError::EmptyGraph);
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); original_ids.len()];
    for (a, b) in compact {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    Ok(Graph::from_adj(adj, original_ids))
}

/// Per-node degrees. Sums to `2m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(pub Vec<usize>);

impl DegreeVector {
    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<usize>() as f64 / self.0.len() as f64
    }

    /// Smallest strictly positive degree, if any node has an edge.
    pub fn min_positive(&self) -> Option<usize> {
        self.0.iter().copied().filter(|&d| d > 0).min()
    }
}

pub fn degree_vector(g: &Graph) -> DegreeVector {
    DegreeVector((0..g.node_count()).map(|i| g.degree(i)).collect())
}

/// `(D - A) x` without materializing either matrix.
pub fn laplacian_matvec(g: &Graph, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != g.node_count() {
        return Err(CoreError::DimensionMismatch {
            expected: g.node_count(),
            got: x.len(),
        });
    }
    let mut out = vec![0.0; x.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = g.degree(i) as f64 * x[i];
        for &j in g.neighbors(i) {
            acc -= x[j as usize];
        }
        *o = acc;
    }
    Ok(out)
}

/// Symmetrically normalized adjacency with self-loops,
/// entry `(i, j) = 1 / sqrt((d_i + 1)(d_j + 1))` for `j` adjacent to `i` or
/// `j = i`. This is the propagation operator of the graph convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn from_graph(g: &Graph) -> NormalizedAdjacency {
        let n = g.node_count();
        let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * g.edge_count() + n);
        let mut vals = Vec::with_capacity(2 * g.edge_count() + n);
        offsets.push(0);
        for i in 0..n {
            // Neighbor lists are sorted; splice the diagonal in order.
            let mut self_written = false;
            for &j in g.neighbors(i) {
                if !self_written && (j as usize) > i {
                    cols.push(i as u32);
                    vals.push(inv_sqrt[i] * inv_sqrt[i]);
                    self_written = true;
                }
                cols.push(j);
                vals.push(inv_sqrt[i] * inv_sqrt[j as usize]);
            }
            if !self_written {
                cols.push(i as u32);
                vals.push(inv_sqrt[i] * inv_sqrt[i]);
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency { offsets, cols, vals }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Stored entries of row `i`: `(column, value)` with columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.vals[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.node_count() {
            return Err(CoreError::DimensionMismatch {
                expected: self.node_count(),
                got: x.len(),
            });
        }
        let mut out = vec![0.0; x.len()];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
        Ok(out)
    }
}
