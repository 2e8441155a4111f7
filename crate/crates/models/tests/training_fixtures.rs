//! End-to-end training behavior on constructed fixtures: a feature-separable
//! dataset every architecture must ace, a no-signal dataset nobody may beat
//! chance on, a two-community link-prediction fixture, determinism and
//! divergence reporting.

use std::sync::Arc;

use grl_core::data::{Dataset, LabelVector};
use grl_core::graph::Graph;
use grl_core::preprocess::{split_nodes, EdgeSplit, NodeSplit};
use grl_core::seed;
use grl_core::synthetic::{generate_synthetic, SyntheticSpec};
use grl_core::DenseMatrix;
use grl_models::autograd::Tape;
use grl_models::eval::auc;
use grl_models::gnn::{
    train_link_predictor, train_node_classifier, Architecture, GnnConfig, LinkDecoder,
};
use rand::RngExt;

fn fast_config(arch: Architecture, seed: u64) -> GnnConfig {
    GnnConfig {
        hidden_dim: 32,
        gat_heads_hidden: 4,
        epochs: 200,
        patience: 25,
        seed,
        ..GnnConfig::defaults(arch)
    }
}

/// Two-cluster dataset: a seeded two-block stochastic block model with
/// strongly shifted per-cluster features. Separable by construction for
/// structure-driven and feature-driven models alike.
fn separable_dataset(seed: u64) -> (Dataset, NodeSplit) {
    let n = 400;
    let half = n / 2;
    let f = 16;
    let mut rng = seed::rng(seed::mix_str(seed, "sbm"));
    let mut edges: Vec<(u64, u64)> = Vec::new();
    for i in 0..n as u64 {
        for j in (i + 1)..n as u64 {
            let same = (i < half as u64) == (j < half as u64);
            let p = if same { 0.05 } else { 0.004 };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::with_node_count(n, &edges).unwrap();
    let mut features = DenseMatrix::zeros(n, f);
    let shift = 3.0 / (f as f64).sqrt();
    for i in 0..n {
        let sign = if i < half { shift } else { -shift };
        for j in 0..f {
            features.set(i, j, sign + rng.random::<f64>() * 2.0 - 1.0);
        }
    }
    let labels = LabelVector::new((0..n).map(|i| usize::from(i >= half)).collect(), 2).unwrap();
    let dataset = Dataset::new("two-cluster".into(), graph, features, labels).unwrap();
    let split = split_nodes(&dataset.labels, (0.8, 0.1, 0.1), seed::mix_str(seed, "split")).unwrap();
    (dataset, split)
}

#[test]
fn all_architectures_solve_the_separable_fixture() {
    for arch in [Architecture::Gcn, Architecture::SageMean, Architecture::Gat] {
        let mut total = 0.0;
        let seeds = 5;
        for s in 0..seeds {
            let (dataset, split) = separable_dataset(100 + s);
            let cfg = fast_config(arch, 500 + s);
            let (_, test_acc, _) = train_node_classifier(&dataset, &split, &cfg).unwrap();
            total += test_acc;
        }
        let mean = total / seeds as f64;
        assert!(
            mean >= 0.95,
            "{}: mean accuracy {mean} below 0.95",
            arch.as_str()
        );
    }
}

#[test]
fn no_signal_fixture_stays_at_chance() {
    // Features carry nothing (shift 0) and block labels are shuffled away
    // from the attachment structure, so chance is the ceiling.
    let k = 4;
    for arch in [Architecture::Gcn, Architecture::SageMean, Architecture::Gat] {
        let mut total = 0.0;
        let seeds = 5;
        for s in 0..seeds {
            let mut dataset = generate_synthetic(&SyntheticSpec {
                node_count: 400,
                attachment_degree: 3,
                num_classes: k,
                feature_dim: 16,
                intra_class_feature_shift: 0.0,
                seed: 300 + s,
            })
            .unwrap();
            // Shuffle labels with a derived stream: the only structure left
            // in the task is class priors.
            use rand::seq::SliceRandom;
            dataset
                .labels
                .labels
                .shuffle(&mut seed::rng(seed::mix_str(300 + s, "label-shuffle")));
            let split =
                split_nodes(&dataset.labels, (0.8, 0.1, 0.1), seed::mix_str(s, "split")).unwrap();
            let cfg = fast_config(arch, 700 + s);
            let (_, test_acc, _) = train_node_classifier(&dataset, &split, &cfg).unwrap();
            total += test_acc;
        }
        let mean = total / seeds as f64;
        let chance = 1.0 / k as f64;
        assert!(
            (mean - chance).abs() <= 0.07,
            "{}: mean accuracy {mean} vs chance {chance}",
            arch.as_str()
        );
    }
}

#[test]
fn training_loss_decreases_in_moving_average() {
    for arch in [Architecture::Gcn, Architecture::SageMean, Architecture::Gat] {
        let (dataset, split) = separable_dataset(42);
        let cfg = fast_config(arch, 9);
        let (_, _, report) = train_node_classifier(&dataset, &split, &cfg).unwrap();
        let losses = &report.train_losses;
        assert!(losses.len() >= 10, "need a training history");
        let ma: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        let tolerance = 0.02 * ma[0];
        for pair in ma.windows(2) {
            assert!(
                pair[1] <= pair[0] + tolerance,
                "{}: moving average rose from {} to {}",
                arch.as_str(),
                pair[0],
                pair[1]
            );
        }
        assert!(
            *ma.last().unwrap() < 0.5 * ma[0],
            "{}: loss barely moved",
            arch.as_str()
        );
    }
}

#[test]
fn node_classification_is_deterministic_given_seed() {
    let (dataset, split) = separable_dataset(7);
    let cfg = fast_config(Architecture::Gcn, 11);
    let (model_a, acc_a, _) = train_node_classifier(&dataset, &split, &cfg).unwrap();
    let (model_b, acc_b, _) = train_node_classifier(&dataset, &split, &cfg).unwrap();
    assert_eq!(acc_a, acc_b);
    assert_eq!(model_a, model_b);
}

#[test]
fn divergence_reports_the_epoch() {
    let (dataset, split) = separable_dataset(3);
    let cfg = GnnConfig {
        learning_rate: 1e160,
        grad_clip: 0.0,
        epochs: 10,
        ..fast_config(Architecture::Gcn, 2)
    };
    match train_node_classifier(&dataset, &split, &cfg) {
        Err(grl_models::ModelError::Divergence { epoch }) => assert!(epoch < 10),
        other => panic!("expected divergence, got {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// Link prediction fixtures.
// ---------------------------------------------------------------------------

/// Two complete 20-cliques joined by one bridge; features shifted per
/// community. Test positives are held-out intra-clique edges, test negatives
/// are cross-clique pairs.
fn two_clique_lp_fixture(seed: u64) -> (Dataset, EdgeSplit) {
    let size = 20;
    let mut edges: Vec<(u64, u64)> = Vec::new();
    for c in 0..2u64 {
        let base = c * size;
        for i in 0..size {
            for j in (i + 1)..size {
                edges.push((base + i, base + j));
            }
        }
    }
    edges.push((0, size)); // bridge
    let graph = Graph::with_node_count(2 * size as usize, &edges).unwrap();

    let n = graph.node_count();
    let f = 8;
    let mut rng = seed::rng(seed::mix_str(seed, "features"));
    let mut features = DenseMatrix::zeros(n, f);
    for i in 0..n {
        let shift = if i < size as usize { 2.0 } else { -2.0 };
        for j in 0..f {
            features.set(i, j, shift + rng.random::<f64>() - 0.5);
        }
    }
    let labels = LabelVector::new((0..n).map(|i| usize::from(i >= size as usize)).collect(), 2).unwrap();
    let dataset = Dataset::new("two-clique".into(), graph, features, labels).unwrap();

    // Hold out 20 intra-clique edges, negatives are cross pairs.
    let mut intra: Vec<(u32, u32)> = dataset
        .graph
        .edges()
        .into_iter()
        .filter(|&(a, b)| (a < size as u32) == (b < size as u32))
        .collect();
    use rand::seq::SliceRandom;
    intra.shuffle(&mut seed::rng(seed::mix_str(seed, "holdout")));
    let test_pos: Vec<(u32, u32)> = intra[..20].to_vec();
    let train_pos: Vec<(u32, u32)> = intra[20..]
        .iter()
        .copied()
        .chain(std::iter::once((0u32, size as u32)))
        .collect();
    let mut cross: Vec<(u32, u32)> = (0..size as u32)
        .flat_map(|a| (size as u32..2 * size as u32).map(move |b| (a, b)))
        .filter(|&(a, b)| !(a == 0 && b == size as u32))
        .collect();
    cross.shuffle(&mut seed::rng(seed::mix_str(seed, "negatives")));
    let test_neg: Vec<(u32, u32)> = cross[..20].to_vec();
    let train_neg: Vec<(u32, u32)> = cross[20..20 + train_pos.len().min(cross.len() - 20)].to_vec();

    (
        dataset,
        EdgeSplit {
            train_pos,
            test_pos,
            train_neg,
            test_neg,
        },
    )
}

#[test]
fn sage_separates_the_two_clique_fixture() {
    let mut total = 0.0;
    let seeds = 3;
    for s in 0..seeds {
        let (dataset, split) = two_clique_lp_fixture(40 + s);
        let cfg = GnnConfig {
            hidden_dim: 16,
            epochs: 120,
            dropout: 0.2,
            seed: 60 + s,
            ..GnnConfig::defaults(Architecture::SageMean)
        };
        let (_, _, test_auc, _) = train_link_predictor(&dataset, &split, &cfg).unwrap();
        total += test_auc;
    }
    let mean = total / seeds as f64;
    assert!(mean >= 0.9, "GraphSage two-clique AUC {mean}");
}

#[test]
fn link_prediction_is_deterministic_given_seed() {
    let (dataset, split) = two_clique_lp_fixture(5);
    let cfg = GnnConfig {
        hidden_dim: 8,
        epochs: 30,
        seed: 21,
        ..GnnConfig::defaults(Architecture::Gcn)
    };
    let (_, _, auc_a, _) = train_link_predictor(&dataset, &split, &cfg).unwrap();
    let (_, _, auc_b, _) = train_link_predictor(&dataset, &split, &cfg).unwrap();
    assert_eq!(auc_a, auc_b);
}

#[test]
fn decoder_on_frozen_random_embeddings_scores_at_chance() {
    // No structure in anything: train the decoder alone on random pair
    // labels over random embeddings, then measure AUC on fresh pairs.
    let mut aucs = Vec::new();
    for s in 0..4u64 {
        let mut rng = seed::rng(seed::mix_str(s, "frozen"));
        let n = 120;
        let d = 16;
        let z = Arc::new(DenseMatrix::from_vec(
            n,
            d,
            (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
        ));
        let rand_pairs = |rng: &mut rand_chacha::ChaCha8Rng, count: usize| -> Vec<(u32, u32)> {
            (0..count)
                .map(|_| {
                    let a = rng.random_range(0..n as u32);
                    let mut b = rng.random_range(0..n as u32);
                    while b == a {
                        b = rng.random_range(0..n as u32);
                    }
                    (a, b)
                })
                .collect()
        };
        let train_pairs = rand_pairs(&mut rng, 300);
        let targets: Arc<Vec<f64>> = Arc::new((0..300).map(|i| f64::from(i % 2 == 0)).collect());
        let mut decoder = LinkDecoder::init(2 * d, s);
        for _ in 0..100 {
            let mut tape = Tape::new();
            let zc = tape.constant(Arc::clone(&z));
            let (logits, param_ids) = decoder.forward(&mut tape, zc, &train_pairs);
            let loss = tape.bce_with_logits(logits, Arc::clone(&targets));
            tape.backward(loss).unwrap();
            let grads: Vec<DenseMatrix> = param_ids
                .iter()
                .map(|&id| tape.grad(id).cloned().unwrap())
                .collect();
            drop(tape);
            for ((_, p), g) in decoder.named_params_mut().into_iter().zip(&grads) {
                for (pv, gv) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *pv -= 0.05 * gv;
                }
            }
        }
        let eval_pairs = rand_pairs(&mut rng, 400);
        let scores = decoder.score(&z, &eval_pairs);
        let labels: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
        aucs.push(auc(&scores, &labels).unwrap());
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.05, "chance-level AUC expected, got {mean}");
}
