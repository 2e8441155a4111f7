//! AUC against the O(n^2) pairwise oracle and chance-level probe behavior.

use grl_core::data::LabelVector;
use grl_core::preprocess::split_nodes;
use grl_core::seed;
use grl_core::synthetic::{generate_synthetic, SyntheticSpec};
use grl_core::DenseMatrix;
use grl_models::eval::{auc, probe_node_classification, ProbeConfig};
use proptest::prelude::*;
use rand::RngExt;

/// Brute force: P(score+ > score-) + 0.5 P(tie) over all pairs.
fn auc_brute_force(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_matches_pairwise_oracle_on_200_random_pairs() {
    let mut rng = seed::rng(424242);
    // Coarse scores force plenty of ties.
    let scores: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 20.0).floor() / 20.0).collect();
    let labels: Vec<bool> = (0..200).map(|_| rng.random::<f64>() < 0.5).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        panic!("degenerate draw");
    }
    let fast = auc(&scores, &labels).unwrap();
    let brute = auc_brute_force(&scores, &labels);
    assert!((fast - brute).abs() <= 1e-10, "{fast} vs {brute}");
}

proptest! {
    #[test]
    fn auc_always_matches_brute_force(
        scores in prop::collection::vec(-5.0f64..5.0, 4..60),
        flips in prop::collection::vec(any::<bool>(), 4..60),
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let labels = &flips[..n];
        let pos = labels.iter().filter(|l| **l).count();
        if pos == 0 || pos == n {
            return Ok(());
        }
        let fast = auc(scores, labels).unwrap();
        let brute = auc_brute_force(scores, labels);
        prop_assert!((fast - brute).abs() <= 1e-10);
    }
}

#[test]
fn noise_embeddings_probe_at_chance() {
    let k = 3;
    let n = 300;
    let mut total = 0.0;
    let seeds = 10;
    for s in 0..seeds {
        let mut rng = seed::rng(seed::mix_str(s, "noise-embedding"));
        let embedding = DenseMatrix::from_vec(
            n,
            16,
            (0..n * 16).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
        );
        let labels = LabelVector::new((0..n).map(|i| i % k).collect(), k).unwrap();
        let split = split_nodes(&labels, (0.8, 0.1, 0.1), seed::mix_str(s, "split")).unwrap();
        let cfg = ProbeConfig { seed: s, ..ProbeConfig::default() };
        total += probe_node_classification(&embedding, &labels, &split, &cfg).unwrap();
    }
    let mean = total / seeds as f64;
    assert!(
        (mean - 1.0 / k as f64).abs() <= 0.05,
        "chance-level accuracy expected, got {mean}"
    );
}

#[test]
fn probe_training_accuracy_beats_majority_frequency() {
    // Optimizer sanity: on its own training set the fitted probe can never
    // do worse than always answering the most common class.
    let n = 200;
    let k = 3;
    let mut rng = seed::rng(314);
    // Mildly informative features, imbalanced classes.
    let labels_vec: Vec<usize> = (0..n).map(|i| if i < 120 { 0 } else if i < 170 { 1 } else { 2 }).collect();
    let mut embedding = DenseMatrix::zeros(n, 8);
    for i in 0..n {
        for j in 0..8 {
            let signal = if j == labels_vec[i] { 0.5 } else { 0.0 };
            embedding.set(i, j, signal + rng.random::<f64>() - 0.5);
        }
    }
    let labels = LabelVector::new(labels_vec, k).unwrap();
    let split = split_nodes(&labels, (0.8, 0.1, 0.1), 7).unwrap();
    let cfg = ProbeConfig::default();
    // Accuracy measured on the training partition itself.
    let train_only = grl_core::preprocess::NodeSplit {
        train: split.train.clone(),
        val: split.val.clone(),
        test: split.train.clone(),
    };
    let train_acc = probe_node_classification(&embedding, &labels, &train_only, &cfg).unwrap();
    let majority = split
        .train
        .iter()
        .filter(|&&i| labels.labels[i] == 0)
        .count() as f64
        / split.train.len() as f64;
    assert!(
        train_acc >= majority,
        "train accuracy {train_acc} below majority frequency {majority}"
    );
}

#[test]
fn zero_shift_synthetic_features_probe_at_chance() {
    // The generator's contract: shift 0 means the raw features carry no
    // class signal at all.
    let k = 4;
    let mut total = 0.0;
    let seeds = 10;
    for s in 0..seeds {
        let dataset = generate_synthetic(&SyntheticSpec {
            node_count: 500,
            attachment_degree: 3,
            num_classes: k,
            feature_dim: 32,
            intra_class_feature_shift: 0.0,
            seed: 9000 + s,
        })
        .unwrap();
        let split = split_nodes(&dataset.labels, (0.8, 0.1, 0.1), seed::mix_str(s, "split")).unwrap();
        let cfg = ProbeConfig { seed: s, ..ProbeConfig::default() };
        total += probe_node_classification(&dataset.features, &dataset.labels, &split, &cfg).unwrap();
    }
    let mean = total / seeds as f64;
    assert!(
        (mean - 1.0 / k as f64).abs() <= 0.05,
        "chance-level accuracy expected, got {mean}"
    );
}
