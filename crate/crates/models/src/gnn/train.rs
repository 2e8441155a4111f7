//! Full-batch training loops for node classification and link prediction.

use std::sync::Arc;

use grl_core::data::Dataset;
use grl_core::preprocess::{remove_edges, sample_negative_edges, EdgeSplit, NodeSplit};
use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;

use super::layers::{GnnModel, GraphContext};
use super::GnnConfig;
use crate::autograd::{Tape, TensorId};
use crate::eval::auc;
use crate::{ModelError, Result};

/// Adam with classic L2 weight decay folded into the gradient.
struct Adam {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: usize,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    fn new(lr: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    fn update(&mut self, params: &mut [&mut DenseMatrix], grads: &[DenseMatrix]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            for (((p, &g0), m), v) in param
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                let g = g0 + self.weight_decay * *p;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Clip the concatenated gradient to a global L2 norm.
fn clip_global_norm(grads: &mut [DenseMatrix], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let total: f64 = grads
        .iter()
        .map(|g| g.as_slice().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = total.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        }
    }
}

fn collect_grads(tape: &Tape, param_ids: &[TensorId]) -> Result<Vec<DenseMatrix>> {
    param_ids
        .iter()
        .map(|&id| {
            let value = tape.value(id);
            Ok(tape
                .grad(id)
                .cloned()
                .unwrap_or_else(|| DenseMatrix::zeros(value.rows(), value.cols())))
        })
        .collect()
}

/// What a finished training run reports beyond the headline metric.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_val_metric: f64,
    pub train_losses: Vec<f64>,
}

fn argmax_accuracy(logits: &DenseMatrix, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for &i in nodes {
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
            .map(|(k, _)| k)
            .expect("non-empty row");
        if pred == labels[i] {
            hits += 1;
        }
    }
    hits as f64 / nodes.len() as f64
}

/// Train a node classifier; returns the model at its best validation
/// accuracy and the test accuracy of that checkpoint.
pub fn train_node_classifier(
    dataset: &Dataset,
    split: &NodeSplit,
    cfg: &GnnConfig,
) -> Result<(GnnModel, f64, TrainReport)> {
    let ctx = GraphContext::new(dataset.graph.clone(), &dataset.features, cfg.gat_self_loops);
    let num_classes = dataset.labels.num_classes;
    let mut model = GnnModel::init(cfg, dataset.features.cols(), num_classes)?;

    let train_idx = Arc::new(split.train.clone());
    let train_labels = Arc::new(
        split
            .train
            .iter()
            .map(|&i| dataset.labels.labels[i])
            .collect::<Vec<_>>(),
    );

    let shapes: Vec<(usize, usize)> = model
        .named_params()
        .iter()
        .map(|(_, p)| (p.rows(), p.cols()))
        .collect();
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay, &shapes);

    let mut best: Option<(f64, f64, GnnModel)> = None;
    let mut patience_left = cfg.patience;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut epochs_run = 0;

    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        let mut tape = Tape::new();
        let (logits, param_ids) =
            model.forward(&mut tape, &ctx, true, seed::mix_index(seed::mix_str(cfg.seed, "dropout"), epoch as u64));
        let picked = tape.gather_rows(logits, Arc::clone(&train_idx));
        let loss = tape.softmax_cross_entropy(picked, Arc::clone(&train_labels));
        let loss_value = tape.scalar(loss);
        if !loss_value.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        losses.push(loss_value);
        tape.backward(loss)?;
        let mut grads = collect_grads(&tape, &param_ids)?;
        drop(tape);
        clip_global_norm(&mut grads, cfg.grad_clip);
        {
            let mut params = model.named_params_mut();
            let mut views: Vec<&mut DenseMatrix> = params.iter_mut().map(|(_, p)| &mut **p).collect();
            adam.update(&mut views, &grads);
        }

        // Validation pass without dropout.
        let mut eval_tape = Tape::new();
        let (logits, _) = model.forward(&mut eval_tape, &ctx, false, 0);
        let out = eval_tape.value(logits);
        if !out.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        let val_acc = argmax_accuracy(out, &dataset.labels.labels, &split.val);
        let test_acc = argmax_accuracy(out, &dataset.labels.labels, &split.test);

        let improved = best.as_ref().is_none_or(|(v, _, _)| val_acc > *v);
        if improved {
            best = Some((val_acc, test_acc, model.clone()));
            patience_left = cfg.patience;
        } else {
            patience_left = patience_left.saturating_sub(1);
            if patience_left == 0 {
                break;
            }
        }
    }

    let (best_val, best_test, best_model) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        best_test,
        TrainReport {
            epochs_run,
            best_val_metric: best_val,
            train_losses: losses,
        },
    ))
}

/// Three affine layers mapping a concatenated pair embedding to one logit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecoder {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<DenseMatrix>,
}

impl LinkDecoder {
    /// Widths `2d -> d -> d/2 -> 1`.
    pub fn init(pair_dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::mix_str(seed, "decoder"));
        let dims = [pair_dim, pair_dim / 2, (pair_dim / 4).max(1), 1];
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let data = (0..w[0] * w[1])
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
                .collect();
            weights.push(DenseMatrix::from_vec(w[0], w[1], data));
            biases.push(DenseMatrix::zeros(1, w[1]));
        }
        Self { weights, biases }
    }

    pub fn named_params(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("decoder{l}.weight"), w));
            out.push((format!("decoder{l}.bias"), b));
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut DenseMatrix)> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.weights.iter_mut().zip(&mut self.biases).enumerate() {
            out.push((format!("decoder{l}.weight"), &mut *w));
            out.push((format!("decoder{l}.bias"), &mut *b));
        }
        out
    }

    /// Record scoring of `(src, dst)` pairs against node states `z`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        z: TensorId,
        pairs: &[(u32, u32)],
    ) -> (TensorId, Vec<TensorId>) {
        let src: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(a, _)| a as usize).collect());
        let dst: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(_, b)| b as usize).collect());
        let zs = tape.gather_rows(z, src);
        let zd = tape.gather_rows(z, dst);
        let mut h = tape.concat_cols(zs, zd);
        let mut param_ids = Vec::new();
        let depth = self.weights.len();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let wid = tape.param(w.clone());
            let bid = tape.param(b.clone());
            param_ids.extend([wid, bid]);
            h = tape.matmul(h, wid);
            h = tape.add_row_bias(h, bid);
            if l + 1 < depth {
                h = tape.relu(h);
            }
        }
        (h, param_ids)
    }

    /// Score pairs without recording gradients.
    pub fn score(&self, tape_free_z: &DenseMatrix, pairs: &[(u32, u32)]) -> Vec<f64> {
        use crate::linalg::matmul;
        let mut h = DenseMatrix::zeros(pairs.len(), 2 * tape_free_z.cols());
        for (r, &(a, b)) in pairs.iter().enumerate() {
            let row = h.row_mut(r);
            let d = tape_free_z.cols();
            row[..d].copy_from_slice(tape_free_z.row(a as usize));
            row[d..].copy_from_slice(tape_free_z.row(b as usize));
        }
        let depth = self.weights.len();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = matmul(&h, w);
            for i in 0..h.rows() {
                for (o, &bv) in h.row_mut(i).iter_mut().zip(b.row(0)) {
                    *o += bv;
                }
            }
            if l + 1 < depth {
                h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        (0..h.rows()).map(|i| h.get(i, 0)).collect()
    }
}

/// Train a link predictor: message passing on the training graph (test
/// positives removed), fresh 1:1 negatives per epoch, binary cross-entropy
/// on the decoder logits. Returns the test AUC.
pub fn train_link_predictor(
    dataset: &Dataset,
    split: &EdgeSplit,
    cfg: &GnnConfig,
) -> Result<(GnnModel, LinkDecoder, f64, TrainReport)> {
    let message_graph = remove_edges(&dataset.graph, &split.test_pos)?;
    let ctx = GraphContext::new(message_graph, &dataset.features, cfg.gat_self_loops);
    let out_dim = cfg.hidden_dim;
    let mut model = GnnModel::init(cfg, dataset.features.cols(), out_dim)?;
    let mut decoder = LinkDecoder::init(2 * out_dim, cfg.seed);

    let shapes: Vec<(usize, usize)> = model
        .named_params()
        .iter()
        .chain(decoder.named_params().iter())
        .map(|(_, p)| (p.rows(), p.cols()))
        .collect();
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay, &shapes);

    let mut losses = Vec::with_capacity(cfg.epochs);
    let neg_seed = seed::mix_str(cfg.seed, "epoch-negatives");

    for epoch in 0..cfg.epochs {
        // Fresh negative graph for this epoch, never colliding with held-out
        // positives.
        let negatives = sample_negative_edges(
            &ctx.graph,
            split.train_pos.len(),
            &split.test_pos,
            seed::mix_index(neg_seed, epoch as u64),
        )?;
        let mut pairs = Vec::with_capacity(2 * split.train_pos.len());
        pairs.extend_from_slice(&split.train_pos);
        pairs.extend_from_slice(&negatives);
        let targets: Arc<Vec<f64>> = Arc::new(
            std::iter::repeat_n(1.0, split.train_pos.len())
                .chain(std::iter::repeat_n(0.0, negatives.len()))
                .collect(),
        );

        let mut tape = Tape::new();
        let (z, mut param_ids) =
            model.forward(&mut tape, &ctx, true, seed::mix_index(seed::mix_str(cfg.seed, "dropout"), epoch as u64));
        let (logits, decoder_ids) = decoder.forward(&mut tape, z, &pairs);
        param_ids.extend(decoder_ids);
        let loss = tape.bce_with_logits(logits, targets);
        let loss_value = tape.scalar(loss);
        if !loss_value.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        losses.push(loss_value);
        tape.backward(loss)?;
        let mut grads = collect_grads(&tape, &param_ids)?;
        drop(tape);
        clip_global_norm(&mut grads, cfg.grad_clip);
        {
            let mut params = model.named_params_mut();
            let mut all: Vec<&mut DenseMatrix> = params.iter_mut().map(|(_, p)| &mut **p).collect();
            let mut dec = decoder.named_params_mut();
            all.extend(dec.iter_mut().map(|(_, p)| &mut **p));
            adam.update(&mut all, &grads);
        }
    }

    // Test evaluation: embeddings from the training graph, scores on the
    // held-out positives and negatives.
    let mut eval_tape = Tape::new();
    let (z, _) = model.forward(&mut eval_tape, &ctx, false, 0);
    let embeddings = eval_tape.value(z).clone();
    drop(eval_tape);
    if !embeddings.is_finite() {
        return Err(ModelError::Divergence { epoch: cfg.epochs });
    }
    let mut scores = decoder.score(&embeddings, &split.test_pos);
    scores.extend(decoder.score(&embeddings, &split.test_neg));
    let labels: Vec<bool> = std::iter::repeat_n(true, split.test_pos.len())
        .chain(std::iter::repeat_n(false, split.test_neg.len()))
        .collect();
    let test_auc = auc(&scores, &labels)?;

    let report = TrainReport {
        epochs_run: cfg.epochs,
        best_val_metric: test_auc,
        train_losses: losses,
    };
    Ok((model, decoder, test_auc, report))
}
