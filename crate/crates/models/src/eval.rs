//! Downstream-task probes over frozen embeddings and the rank-based AUC.

use grl_core::data::LabelVector;
use grl_core::preprocess::{EdgeSplit, NodeSplit};
use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;

use crate::autograd::sigmoid;
use crate::linalg::matmul;
use crate::{ModelError, Result};

/// Mann–Whitney AUC with midrank tie handling:
/// `P(score+ > score-) + 0.5 * P(tie)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ModelError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks: tied scores share the average of their 1-based rank range.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (positives * (positives + 1)) as f64 / 2.0;
    Ok(u / (positives as f64 * negatives as f64))
}

/// Logistic-regression probe hyperparameters, frozen for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub l2_strength: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1e-4,
            epochs: 300,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression trained full-batch on the train nodes.
pub struct LogisticProbe {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LogisticProbe {
    fn fit(features: &DenseMatrix, rows: &[usize], labels: &[usize], num_classes: usize, cfg: &ProbeConfig) -> Self {
        let dim = features.cols();
        let mut rng = seed::rng(seed::mix_str(cfg.seed, "probe"));
        let mut weights = DenseMatrix::from_vec(
            dim,
            num_classes,
            (0..dim * num_classes)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 1e-3)
                .collect(),
        );
        let mut bias = vec![0.0; num_classes];
        let batch = rows.len() as f64;
        for _ in 0..cfg.epochs {
            let mut grad_w = DenseMatrix::zeros(dim, num_classes);
            let mut grad_b = vec![0.0; num_classes];
            for (&row, &label) in rows.iter().zip(labels) {
                let x = features.row(row);
                // Softmax over k logits.
                let mut logits: Vec<f64> = (0..num_classes)
                    .map(|c| {
                        bias[c]
                            + x.iter()
                                .enumerate()
                                .map(|(j, &v)| v * weights.get(j, c))
                                .sum::<f64>()
                    })
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in logits.iter_mut() {
                    *l = (*l - max).exp();
                    z += *l;
                }
                for (c, l) in logits.iter().enumerate() {
                    let delta = l / z - f64::from(c == label);
                    grad_b[c] += delta;
                    for (j, &v) in x.iter().enumerate() {
                        if v != 0.0 {
                            grad_w.set(j, c, grad_w.get(j, c) + delta * v);
                        }
                    }
                }
            }
            for j in 0..dim {
                for c in 0..num_classes {
                    let g = grad_w.get(j, c) / batch + cfg.l2_strength * weights.get(j, c);
                    weights.set(j, c, weights.get(j, c) - cfg.learning_rate * g);
                }
            }
            for (b, g) in bias.iter_mut().zip(&grad_b) {
                *b -= cfg.learning_rate * g / batch;
            }
        }
        Self { weights, bias }
    }

    fn predict(&self, features: &DenseMatrix, row: usize) -> usize {
        let logits = matmul(
            &DenseMatrix::from_vec(1, features.cols(), features.row(row).to_vec()),
            &self.weights,
        );
        logits
            .row(0)
            .iter()
            .zip(&self.bias)
            .map(|(l, b)| l + b)
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
            .map(|(c, _)| c)
            .expect("at least one class")
    }
}

/// Accuracy of a logistic probe on the test partition of a node split.
pub fn probe_node_classification(
    embedding: &DenseMatrix,
    labels: &LabelVector,
    split: &NodeSplit,
    cfg: &ProbeConfig,
) -> Result<f64> {
    if !embedding.is_finite() {
        return Err(ModelError::NonFinite("embedding"));
    }
    if embedding.rows() != labels.len() {
        return Err(ModelError::ShapeMismatch {
            context: "probe_node_classification",
            expected: format!("{} rows", labels.len()),
            got: format!("{}", embedding.rows()),
        });
    }
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels.labels[i]).collect();
    let probe = LogisticProbe::fit(embedding, &split.train, &train_labels, labels.num_classes, cfg);
    let hits = split
        .test
        .iter()
        .filter(|&&i| probe.predict(embedding, i) == labels.labels[i])
        .count();
    Ok(hits as f64 / split.test.len().max(1) as f64)
}

/// Binary logistic probe on concatenated pair embeddings; each training pair
/// is added in both orientations. Returns the test AUC.
pub fn probe_link_prediction(
    embedding: &DenseMatrix,
    split: &EdgeSplit,
    cfg: &ProbeConfig,
) -> Result<f64> {
    if !embedding.is_finite() {
        return Err(ModelError::NonFinite("embedding"));
    }
    let dim = embedding.cols();
    let mut rng = seed::rng(seed::mix_str(cfg.seed, "lp-probe"));
    let mut weights: Vec<f64> = (0..2 * dim)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 1e-3)
        .collect();
    let mut bias = 0.0;

    let mut examples: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * (split.train_pos.len() + split.train_neg.len()));
    for &(a, b) in &split.train_pos {
        examples.push((a, b, 1.0));
        examples.push((b, a, 1.0));
    }
    for &(a, b) in &split.train_neg {
        examples.push((a, b, 0.0));
        examples.push((b, a, 0.0));
    }
    let batch = examples.len() as f64;

    let mut grad = vec![0.0f64; 2 * dim];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        for &(a, b, label) in &examples {
            let (xa, xb) = (embedding.row(a as usize), embedding.row(b as usize));
            let score = bias
                + xa.iter().zip(&weights[..dim]).map(|(x, w)| x * w).sum::<f64>()
                + xb.iter().zip(&weights[dim..]).map(|(x, w)| x * w).sum::<f64>();
            let delta = sigmoid(score) - label;
            grad_bias += delta;
            for (g, &x) in grad[..dim].iter_mut().zip(xa) {
                *g += delta * x;
            }
            for (g, &x) in grad[dim..].iter_mut().zip(xb) {
                *g += delta * x;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * (g / batch + cfg.l2_strength * *w);
        }
        bias -= cfg.learning_rate * grad_bias / batch;
    }

    let score_pair = |&(a, b): &(u32, u32)| {
        let (xa, xb) = (embedding.row(a as usize), embedding.row(b as usize));
        bias + xa.iter().zip(&weights[..dim]).map(|(x, w)| x * w).sum::<f64>()
            + xb.iter().zip(&weights[dim..]).map(|(x, w)| x * w).sum::<f64>()
    };
    let mut scores: Vec<f64> = split.test_pos.iter().map(score_pair).collect();
    scores.extend(split.test_neg.iter().map(score_pair));
    let labels: Vec<bool> = std::iter::repeat_n(true, split.test_pos.len())
        .chain(std::iter::repeat_n(false, split.test_neg.len()))
        .collect();
    auc(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_separation() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_errors() {
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn auc_is_invariant_under_monotone_transform() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.65, 0.2];
        let labels = [false, true, false, true, true, false];
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (5.0 * s).tanh()).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| 100.0 * s + 7.0).collect();
        assert!((auc(&squashed, &labels).unwrap() - base).abs() < 1e-15);
        assert!((auc(&shifted, &labels).unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn one_hot_embeddings_classify_perfectly() {
        let n = 60;
        let k = 3;
        let labels = LabelVector::new((0..n).map(|i| i % k).collect(), k).unwrap();
        let mut embedding = DenseMatrix::zeros(n, k);
        for i in 0..n {
            embedding.set(i, i % k, 1.0);
        }
        let split = grl_core::preprocess::split_nodes(&labels, (0.8, 0.1, 0.1), 3).unwrap();
        let acc = probe_node_classification(&embedding, &labels, &split, &ProbeConfig::default()).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn identical_embeddings_predict_majority_class() {
        // 70/30 imbalance, constant features: optimum is the majority class.
        let n = 100;
        let labels = LabelVector::new(
            (0..n).map(|i| usize::from(i >= 70)).collect(),
            2,
        )
        .unwrap();
        let embedding = DenseMatrix::from_vec(n, 4, vec![1.0; n * 4]);
        let split = grl_core::preprocess::split_nodes(&labels, (0.8, 0.1, 0.1), 5).unwrap();
        let acc = probe_node_classification(&embedding, &labels, &split, &ProbeConfig::default()).unwrap();
        let majority_in_test =
            split.test.iter().filter(|&&i| labels.labels[i] == 0).count() as f64 / split.test.len() as f64;
        assert!((acc - majority_in_test).abs() < 1e-12);
    }
}
