//! Statistics against brute-force oracles and permutation invariance.

use proptest::prelude::*;

use grl_core::graph::{build_graph, Graph};
use grl_core::stats::{
    compute_stats, edge_distribution_entropy, power_law_exponent, triangle_density,
};
use grl_core::synthetic::erdos_renyi;

/// O(n^3) triple enumeration.
fn triangles_brute_force(g: &Graph) -> u64 {
    let n = g.node_count();
    let mut count = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if !g.has_edge(i, j) {
                continue;
            }
            for k in (j + 1)..n {
                if g.has_edge(i, k) && g.has_edge(j, k) {
                    count += 1;
                }
            }
        }
    }
    count
}

fn relabel(g: &Graph, perm: &[usize]) -> Graph {
    let edges: Vec<(u64, u64)> = g
        .edges()
        .iter()
        .map(|&(a, b)| (perm[a as usize] as u64, perm[b as usize] as u64))
        .collect();
    Graph::with_node_count(g.node_count(), &edges).unwrap()
}

proptest! {
    #[test]
    fn triangle_density_matches_brute_force(edges in prop::collection::vec((0u64..50, 0u64..50), 1..300)) {
        if let Ok(g) = build_graph(&edges) {
            let fast = triangle_density(&g);
            let brute = triangles_brute_force(&g) as f64 / g.node_count() as f64;
            prop_assert!((fast - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_is_in_unit_interval(edges in prop::collection::vec((0u64..30, 0u64..30), 1..150)) {
        if let Ok(g) = build_graph(&edges) {
            if g.node_count() >= 2 {
                let h = edge_distribution_entropy(&g).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&h), "H_er = {h}");
            }
        }
    }

    #[test]
    fn statistics_are_permutation_invariant(seed in 0u64..200) {
        let g = erdos_renyi(24, 0.25, seed).unwrap();
        if g.edge_count() == 0 {
            return Ok(());
        }
        // Deterministic derangement-ish permutation: reverse.
        let perm: Vec<usize> = (0..24).rev().collect();
        let h = relabel(&g, &perm);
        let (a, b) = (compute_stats(&g).unwrap(), compute_stats(&h).unwrap());
        prop_assert_eq!(a.n, b.n);
        prop_assert_eq!(a.m, b.m);
        prop_assert!((a.fill - b.fill).abs() < 1e-15);
        prop_assert!((a.triangles_per_node - b.triangles_per_node).abs() < 1e-12);
        prop_assert!(a.gamma == b.gamma || (a.gamma - b.gamma).abs() < 1e-12);
        prop_assert!((a.entropy - b.entropy).abs() < 1e-12);
    }
}

#[test]
fn entropy_is_one_exactly_for_equal_degrees() {
    // Cycle graph: all degrees 2.
    let cycle: Vec<(u64, u64)> = (0..8u64).map(|i| (i, (i + 1) % 8)).collect();
    let g = build_graph(&cycle).unwrap();
    assert!((edge_distribution_entropy(&g).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(power_law_exponent(&g).unwrap(), f64::INFINITY);

    // Unequal degrees stay strictly below one.
    let star = build_graph(&[(0, 1), (0, 2), (0, 3)]).unwrap();
    assert!(edge_distribution_entropy(&star).unwrap() < 1.0 - 1e-6);
}
