//! Layer parameterizations and the tape forward pass per architecture.
//!
//! GCN propagates `sigma(S H Theta)` with the symmetrically normalized
//! self-loop adjacency. GraphSage-mean concatenates each node's own state
//! with its neighborhood mean and applies one weight of shape `2f x f'`.
//! GAT scores each support pair with a leaky-rectified additive attention,
//! softmax-normalizes per node, and aggregates the transformed neighbor
//! states; hidden layers concatenate heads, the last layer averages them.

use std::sync::Arc;

use grl_core::graph::{Graph, NormalizedAdjacency};
use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;

use super::{Activation, Architecture, GnnConfig};
use crate::autograd::{segment_attention_forward, AttentionSupport, Tape, TensorId};
use crate::linalg::matmul;

/// Graph-derived operands shared by every epoch of a run (and safely by
/// concurrent runs on the same degraded graph).
pub struct GraphContext {
    pub graph: Arc<Graph>,
    pub norm_adj: Arc<NormalizedAdjacency>,
    pub attention: Arc<AttentionSupport>,
    pub features: Arc<DenseMatrix>,
}

impl GraphContext {
    /// Build operands for `graph`. Features are row-normalized to unit L1
    /// mass, the same treatment for every architecture.
    pub fn new(graph: Graph, features: &DenseMatrix, self_loops_in_attention: bool) -> Self {
        let mut normalized = features.clone();
        normalized.l1_normalize_rows();
        let norm_adj = Arc::new(NormalizedAdjacency::from_graph(&graph));
        let attention = Arc::new(AttentionSupport::from_graph(&graph, self_loops_in_attention));
        Self {
            graph: Arc::new(graph),
            norm_adj,
            attention,
            features: Arc::new(normalized),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub weight: DenseMatrix,
    pub attn_src: DenseMatrix,
    pub attn_dst: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Dense { weight: DenseMatrix },
    Gat { heads: Vec<GatHead>, average: bool },
}

/// One trained (or training) model: per-layer parameters plus optional
/// biases, in a fixed enumeration order shared by the optimizer, the
/// gradient checks and the checkpoint format.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub architecture: Architecture,
    pub layers: Vec<LayerParams>,
    pub biases: Vec<Option<DenseMatrix>>,
    pub activation: Activation,
    pub leaky_slope: f64,
    pub gat_aggregate_self: bool,
    pub dropout: f64,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl RngExt) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

impl GnnModel {
    pub fn init(cfg: &GnnConfig, input_dim: usize, output_dim: usize) -> crate::Result<Self> {
        cfg.validate()?;
        let dims = cfg.layer_dims(input_dim, output_dim);
        let mut rng = seed::rng(seed::mix_str(cfg.seed, "init"));
        let mut layers = Vec::new();
        let mut biases = Vec::new();
        // Hidden GAT layers concatenate heads, widening the next layer's input.
        let mut f_in = dims[0];
        for l in 0..cfg.num_layers {
            let f_out = dims[l + 1];
            let last = l + 1 == cfg.num_layers;
            match cfg.architecture {
                Architecture::Gcn => {
                    layers.push(LayerParams::Dense {
                        weight: glorot(f_in, f_out, &mut rng),
                    });
                    biases.push(cfg.use_bias.then(|| DenseMatrix::zeros(1, f_out)));
                    f_in = f_out;
                }
                Architecture::SageMean => {
                    layers.push(LayerParams::Dense {
                        weight: glorot(2 * f_in, f_out, &mut rng),
                    });
                    biases.push(cfg.use_bias.then(|| DenseMatrix::zeros(1, f_out)));
                    f_in = f_out;
                }
                Architecture::Gat => {
                    let heads_count = if last { cfg.gat_heads_output } else { cfg.gat_heads_hidden };
                    let heads = (0..heads_count)
                        .map(|_| GatHead {
                            weight: glorot(f_in, f_out, &mut rng),
                            attn_src: glorot(f_out, 1, &mut rng),
                            attn_dst: glorot(f_out, 1, &mut rng),
                        })
                        .collect();
                    layers.push(LayerParams::Gat { heads, average: last });
                    let width = if last { f_out } else { f_out * heads_count };
                    biases.push(cfg.use_bias.then(|| DenseMatrix::zeros(1, width)));
                    f_in = width;
                }
            }
        }
        Ok(Self {
            architecture: cfg.architecture,
            layers,
            biases,
            activation: cfg.activation,
            leaky_slope: cfg.leaky_slope,
            gat_aggregate_self: cfg.gat_aggregate_self,
            dropout: cfg.dropout,
        })
    }

    /// Effective input width of a GAT layer `l + 1` given head concat; used
    /// when sizing fixtures in tests.
    pub fn output_dim(&self) -> usize {
        match self.layers.last().expect("at least one layer") {
            LayerParams::Dense { weight } => weight.cols(),
            LayerParams::Gat { heads, average } => {
                let w = heads[0].weight.cols();
                if *average {
                    w
                } else {
                    w * heads.len()
                }
            }
        }
    }

    /// Named views of every parameter, in backward-stable order.
    pub fn named_params(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerParams::Dense { weight } => out.push((format!("layer{l}.weight"), weight)),
                LayerParams::Gat { heads, .. } => {
                    for (h, head) in heads.iter().enumerate() {
                        out.push((format!("layer{l}.head{h}.weight"), &head.weight));
                        out.push((format!("layer{l}.head{h}.attn_src"), &head.attn_src));
                        out.push((format!("layer{l}.head{h}.attn_dst"), &head.attn_dst));
                    }
                }
            }
            if let Some(bias) = &self.biases[l] {
                out.push((format!("layer{l}.bias"), bias));
            }
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut DenseMatrix)> {
        let mut out = Vec::new();
        for (l, (layer, bias)) in self.layers.iter_mut().zip(&mut self.biases).enumerate() {
            match layer {
                LayerParams::Dense { weight } => out.push((format!("layer{l}.weight"), weight)),
                LayerParams::Gat { heads, .. } => {
                    for (h, head) in heads.iter_mut().enumerate() {
                        out.push((format!("layer{l}.head{h}.weight"), &mut head.weight));
                        out.push((format!("layer{l}.head{h}.attn_src"), &mut head.attn_src));
                        out.push((format!("layer{l}.head{h}.attn_dst"), &mut head.attn_dst));
                    }
                }
            }
            if let Some(bias) = bias {
                out.push((format!("layer{l}.bias"), bias));
            }
        }
        out
    }

    /// Record the full forward pass on `tape`. Returns the output node and
    /// the parameter tensor ids in [`Self::named_params`] order, so the
    /// caller can read gradients back positionally.
    pub fn forward(
        &self,
        tape: &mut Tape,
        ctx: &GraphContext,
        training: bool,
        dropout_seed: u64,
    ) -> (TensorId, Vec<TensorId>) {
        let mut param_ids = Vec::new();
        let mut h = tape.constant(Arc::clone(&ctx.features));
        let layer_count = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            if training && self.dropout > 0.0 {
                h = tape.dropout(h, self.dropout, seed::mix_index(dropout_seed, l as u64));
            }
            let mut merged = match layer {
                LayerParams::Dense { weight } => {
                    let w = tape.param(weight.clone());
                    param_ids.push(w);
                    match self.architecture {
                        Architecture::Gcn => {
                            let hw = tape.matmul(h, w);
                            tape.spmm(&ctx.norm_adj, hw)
                        }
                        Architecture::SageMean => {
                            let agg = tape.neighbor_mean(&ctx.graph, h);
                            let cat = tape.concat_cols(h, agg);
                            tape.matmul(cat, w)
                        }
                        Architecture::Gat => unreachable!("gat uses LayerParams::Gat"),
                    }
                }
                LayerParams::Gat { heads, average } => {
                    let mut head_outputs = Vec::with_capacity(heads.len());
                    for head in heads {
                        let w = tape.param(head.weight.clone());
                        let a_src = tape.param(head.attn_src.clone());
                        let a_dst = tape.param(head.attn_dst.clone());
                        param_ids.extend([w, a_src, a_dst]);
                        let z = tape.matmul(h, w);
                        let s = tape.matmul(z, a_src);
                        let t = tape.matmul(z, a_dst);
                        head_outputs.push(tape.segment_attention(
                            &ctx.attention,
                            z,
                            s,
                            t,
                            self.leaky_slope,
                            self.gat_aggregate_self,
                        ));
                    }
                    if *average {
                        let mut acc = head_outputs[0];
                        for &other in &head_outputs[1..] {
                            acc = tape.add(acc, other);
                        }
                        if head_outputs.len() > 1 {
                            acc = tape.scale(acc, 1.0 / head_outputs.len() as f64);
                        }
                        acc
                    } else {
                        let mut acc = head_outputs[0];
                        for &other in &head_outputs[1..] {
                            acc = tape.concat_cols(acc, other);
                        }
                        acc
                    }
                }
            };
            if let Some(bias) = &self.biases[l] {
                let b = tape.param(bias.clone());
                param_ids.push(b);
                merged = tape.add_row_bias(merged, b);
            }
            let last = l + 1 == layer_count;
            h = if last {
                merged
            } else {
                match self.activation {
                    Activation::Relu => tape.relu(merged),
                    Activation::Identity => merged,
                }
            };
        }
        (h, param_ids)
    }
}

/// Normalized attention coefficients of a single GAT layer over `h`,
/// without recording a tape: per node `i`, in support order.
pub fn attention_coefficients(
    support: &AttentionSupport,
    h: &DenseMatrix,
    head: &GatHead,
    slope: f64,
) -> Vec<f64> {
    let z = matmul(h, &head.weight);
    let s = matmul(&z, &head.attn_src);
    let t = matmul(&z, &head.attn_dst);
    let (_, alpha, _) = segment_attention_forward(support, &z, &s, &t, slope, false);
    alpha
}
