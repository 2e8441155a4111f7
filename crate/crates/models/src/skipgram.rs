//! Negative-sampling Skipgram over walk corpora.
//!
//! For every (center, context) pair within the window of a walk, the input
//! vector of the center and the output vector of the context are pushed
//! together while `k` negatives drawn proportional to frequency^0.75 are
//! pushed apart. Plain SGD with a linearly decaying learning rate; the
//! input-side vectors are the embedding.

use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;

use crate::autograd::sigmoid;
use crate::walk::{WalkConfig, WalkCorpus};
use crate::{EmbeddingMatrix, ModelError, Result};

const LR_FLOOR_FACTOR: f64 = 1e-4;

struct NegativeTable {
    /// Cumulative unnormalized mass per node, for inverse-CDF sampling.
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(frequencies: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(frequencies.len());
        let mut acc = 0.0;
        for &f in frequencies {
            acc += (f as f64).powf(0.75);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl RngExt) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Train and return the input-side embedding, one row per node.
pub fn train_skipgram(corpus: &WalkCorpus, cfg: &WalkConfig, seed: u64) -> Result<EmbeddingMatrix> {
    train_skipgram_with_losses(corpus, cfg, seed).map(|(e, _)| e)
}

/// As [`train_skipgram`], also reporting the mean pair loss per epoch.
pub fn train_skipgram_with_losses(
    corpus: &WalkCorpus,
    cfg: &WalkConfig,
    seed: u64,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    if cfg.embedding_dim == 0 {
        return Err(ModelError::InvalidConfig("embedding_dim must be positive".into()));
    }
    if corpus.walks.is_empty() {
        return Err(ModelError::InvalidConfig("empty walk corpus".into()));
    }
    let n = corpus.node_count;
    let dim = cfg.embedding_dim;

    let mut frequencies = vec![0u64; n];
    for walk in &corpus.walks {
        for &node in walk {
            frequencies[node as usize] += 1;
        }
    }
    let table = NegativeTable::new(&frequencies);

    let mut rng = seed::rng(seed::mix_str(seed, "skipgram"));
    let inv_dim = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * inv_dim)
        .collect();
    let mut output = vec![0.0f64; n * dim];

    // Total center-context pairs across all epochs, for the lr schedule.
    let pairs_per_epoch: usize = corpus
        .walks
        .iter()
        .map(|walk| {
            let len = walk.len();
            (0..len)
                .map(|c| (c.saturating_sub(cfg.window)..(c + cfg.window + 1).min(len)).len() - 1)
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1);

    let lr0 = cfg.learning_rate;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut gradient = vec![0.0f64; dim];

    for _epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for walk in &corpus.walks {
            let len = walk.len();
            for center_pos in 0..len {
                let center = walk[center_pos] as usize;
                let lo = center_pos.saturating_sub(cfg.window);
                let hi = (center_pos + cfg.window + 1).min(len);
                for context_pos in lo..hi {
                    if context_pos == center_pos {
                        continue;
                    }
                    let context = walk[context_pos] as usize;
                    let lr = lr0 * (1.0 - processed as f64 / total_pairs as f64).max(LR_FLOOR_FACTOR);
                    processed += 1;

                    let center_row = center * dim..(center + 1) * dim;
                    gradient.iter_mut().for_each(|g| *g = 0.0);
                    let mut pair_loss = 0.0;

                    // Positive example plus k negatives.
                    for k in 0..=cfg.negatives_per_positive {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let neg = table.sample(&mut rng);
                            if neg == context {
                                continue;
                            }
                            (neg, 0.0)
                        };
                        let target_row = target * dim..(target + 1) * dim;
                        let score: f64 = input[center_row.clone()]
                            .iter()
                            .zip(&output[target_row.clone()])
                            .map(|(a, b)| a * b)
                            .sum();
                        let prediction = sigmoid(score);
                        pair_loss -= if label == 1.0 {
                            prediction.max(1e-12).ln()
                        } else {
                            (1.0 - prediction).max(1e-12).ln()
                        };
                        let g = (label - prediction) * lr;
                        for ((grad, out), inp) in gradient
                            .iter_mut()
                            .zip(&mut output[target_row])
                            .zip(&input[center_row.clone()])
                        {
                            *grad += g * *out;
                            *out += g * *inp;
                        }
                    }
                    for (inp, grad) in input[center_row].iter_mut().zip(&gradient) {
                        *inp += *grad;
                    }
                    loss_sum += pair_loss;
                    loss_count += 1;
                }
            }
        }
        epoch_losses.push(if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 });
    }

    let embedding = DenseMatrix::from_vec(n, dim, input);
    if !embedding.is_finite() {
        return Err(ModelError::NonFinite("skipgram embedding"));
    }
    Ok((embedding, epoch_losses))
}
