//! Structural invariants of graph construction and the matrix operators,
//! checked against dense oracles built directly from the adjacency.

use proptest::prelude::*;

use grl_core::graph::{build_graph, degree_vector, laplacian_matvec, Graph, NormalizedAdjacency};
use grl_core::seed;
use grl_core::synthetic::erdos_renyi;
use rand::RngExt;

/// Dense n*n adjacency lifted straight from the neighbor lists.
fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for &j in g.neighbors(i) {
            a[i][j as usize] = 1.0;
        }
    }
    a
}

fn arb_edges() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0u64..40, 0u64..40), 1..120)
}

proptest! {
    #[test]
    fn rebuilding_from_emitted_edges_is_idempotent(edges in arb_edges()) {
        if let Ok(g) = build_graph(&edges) {
            let emit = |g: &Graph| -> Vec<(u64, u64)> {
                g.edges().iter().map(|&(a, b)| (a as u64, b as u64)).collect()
            };
            // One rebuild is the same graph up to the relabeling it records.
            let rebuilt = build_graph(&emit(&g)).unwrap();
            prop_assert_eq!(g.node_count(), rebuilt.node_count());
            prop_assert_eq!(g.edge_count(), rebuilt.edge_count());
            for new in 0..rebuilt.node_count() {
                let old = rebuilt.original_id(new) as usize;
                let mapped: Vec<u32> = {
                    let mut v: Vec<u32> = rebuilt
                        .neighbors(new)
                        .iter()
                        .map(|&x| rebuilt.original_id(x as usize) as u32)
                        .collect();
                    v.sort_unstable();
                    v
                };
                prop_assert_eq!(mapped.as_slice(), g.neighbors(old));
            }
            // No information is gained or lost by further rebuilds either.
            let again = build_graph(&emit(&rebuilt)).unwrap();
            prop_assert_eq!(again.node_count(), rebuilt.node_count());
            prop_assert_eq!(again.edge_count(), rebuilt.edge_count());
        }
    }

    #[test]
    fn degrees_sum_to_twice_edges(edges in arb_edges()) {
        if let Ok(g) = build_graph(&edges) {
            let d = degree_vector(&g);
            prop_assert_eq!(d.0.iter().sum::<usize>(), 2 * g.edge_count());
        }
    }

    #[test]
    fn adjacency_is_symmetric_sorted_simple(edges in arb_edges()) {
        if let Ok(g) = build_graph(&edges) {
            for i in 0..g.node_count() {
                let ns = g.neighbors(i);
                prop_assert!(ns.windows(2).all(|w| w[0] < w[1]), "sorted, no duplicates");
                prop_assert!(!ns.contains(&(i as u32)), "no self-loop");
                for &j in ns {
                    prop_assert!(g.has_edge(j as usize, i), "symmetry");
                }
            }
        }
    }

    #[test]
    fn laplacian_quadratic_form_is_nonnegative(edges in arb_edges(), seed in 0u64..1000) {
        if let Ok(g) = build_graph(&edges) {
            let mut rng = seed::rng(seed);
            let x: Vec<f64> = (0..g.node_count()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let lx = laplacian_matvec(&g, &x).unwrap();
            let quad: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
            prop_assert!(quad >= -1e-9, "x'Lx = {quad}");
        }
    }
}

#[test]
fn laplacian_matches_dense_oracle_on_random_graph() {
    let g = erdos_renyi(20, 0.3, 42).unwrap();
    let a = dense_adjacency(&g);
    let mut rng = seed::rng(7);
    for _ in 0..5 {
        let x: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let fast = laplacian_matvec(&g, &x).unwrap();
        for i in 0..20 {
            let mut expected = g.degree(i) as f64 * x[i];
            for j in 0..20 {
                expected -= a[i][j] * x[j];
            }
            assert!((fast[i] - expected).abs() < 1e-10);
        }
    }
}

#[test]
fn normalized_adjacency_matches_dense_oracle() {
    let g = erdos_renyi(30, 0.2, 11).unwrap();
    let s = NormalizedAdjacency::from_graph(&g);
    let n = g.node_count();
    // Dense oracle built independently: entry (i, j) = 1/sqrt(d~_i d~_j) on
    // the self-loop-augmented pattern.
    let d_tilde: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        dense[i][i] = 1.0 / (d_tilde[i] * d_tilde[i]).sqrt();
        for &j in g.neighbors(i) {
            dense[i][j as usize] = 1.0 / (d_tilde[i] * d_tilde[j as usize]).sqrt();
        }
    }
    // Row sums agree with S * 1.
    let ones = vec![1.0; n];
    let sv = s.matvec(&ones).unwrap();
    for i in 0..n {
        let expected: f64 = dense[i].iter().sum();
        assert!((sv[i] - expected).abs() < 1e-12);
    }
    // Stored pattern and entries agree everywhere.
    for i in 0..n {
        let mut row = vec![0.0; n];
        for (j, v) in s.row(i) {
            row[j] = v;
        }
        for j in 0..n {
            assert!((row[j] - dense[i][j]).abs() < 1e-15, "entry ({i},{j})");
        }
    }
}

#[test]
fn normalized_adjacency_spectral_radius_at_most_one() {
    for seed in [1, 2, 3] {
        let g = erdos_renyi(25, 0.25, seed).unwrap();
        let s = NormalizedAdjacency::from_graph(&g);
        let mut v: Vec<f64> = {
            let mut rng = seed::rng(seed + 100);
            (0..25).map(|_| rng.random::<f64>() + 0.1).collect()
        };
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = s.matvec(&v).unwrap();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w;
            let scale = 1.0 / norm;
            v.iter_mut().for_each(|x| *x *= scale);
        }
        assert!(lambda <= 1.0 + 1e-9, "spectral radius estimate {lambda}");
        assert!(lambda > 0.9, "power iteration should find the top eigenvalue");
    }
}
