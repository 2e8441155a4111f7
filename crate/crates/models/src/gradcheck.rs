//! Finite-difference verification of the tape gradients, shared by the unit
//! suite and the acceptance harness. Central differences with `h = 1e-5`
//! against the analytic pass on a fixed 8-node fixture; the reported number
//! is the worst per-coordinate relative disagreement (absolute when both
//! sides are numerically zero).

use std::sync::Arc;

use grl_core::graph::Graph;
use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;

use crate::autograd::Tape;
use crate::gnn::{Architecture, GnnConfig, GnnModel, GraphContext, LinkDecoder};

const H: f64 = 1e-5;
const ZERO_FLOOR: f64 = 1e-7;

fn fixture_graph() -> Graph {
    Graph::with_node_count(
        8,
        &[
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 6),
            (6, 0),
            (5, 7),
        ],
    )
    .expect("static fixture")
}

fn fixture_features(n: usize, f: usize, seed: u64) -> DenseMatrix {
    let mut rng = seed::rng(seed);
    DenseMatrix::from_vec(
        n,
        f,
        (0..n * f).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
    )
}

fn config(arch: Architecture, heads: usize) -> GnnConfig {
    GnnConfig {
        hidden_dim: 4,
        gat_heads_hidden: heads,
        gat_heads_output: 1,
        dropout: 0.0,
        seed: 31,
        ..GnnConfig::defaults(arch)
    }
}

fn worst_disagreement(analytic: &[DenseMatrix], numeric: &[DenseMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&av, &nv) in a.as_slice().iter().zip(n.as_slice()) {
            let scale = av.abs().max(nv.abs());
            let err = if scale < ZERO_FLOOR {
                (av - nv).abs()
            } else {
                (av - nv).abs() / scale
            };
            worst = worst.max(err);
        }
    }
    worst
}

/// Max disagreement for the node-classification loss.
pub fn nc_gradcheck(arch: Architecture, heads: usize) -> f64 {
    let g = fixture_graph();
    let features = fixture_features(8, 5, 51);
    let ctx = GraphContext::new(g, &features, true);
    let train_idx: Arc<Vec<usize>> = Arc::new(vec![0, 1, 3, 4, 6, 7]);
    let train_labels: Arc<Vec<usize>> = Arc::new(vec![0, 1, 2, 0, 1, 2]);
    let cfg = config(arch, heads);
    let mut model = GnnModel::init(&cfg, 5, 3).expect("valid fixture config");

    let loss = |model: &GnnModel| -> f64 {
        let mut tape = Tape::new();
        let (logits, _) = model.forward(&mut tape, &ctx, false, 0);
        let picked = tape.gather_rows(logits, Arc::clone(&train_idx));
        let l = tape.softmax_cross_entropy(picked, Arc::clone(&train_labels));
        tape.scalar(l)
    };

    let analytic: Vec<DenseMatrix> = {
        let mut tape = Tape::new();
        let (logits, ids) = model.forward(&mut tape, &ctx, false, 0);
        let picked = tape.gather_rows(logits, Arc::clone(&train_idx));
        let l = tape.softmax_cross_entropy(picked, Arc::clone(&train_labels));
        tape.backward(l).expect("fresh tape");
        ids.iter()
            .map(|&id| {
                let v = tape.value(id);
                tape.grad(id)
                    .cloned()
                    .unwrap_or_else(|| DenseMatrix::zeros(v.rows(), v.cols()))
            })
            .collect()
    };

    let shapes: Vec<(usize, usize)> = model
        .named_params()
        .iter()
        .map(|(_, p)| (p.rows(), p.cols()))
        .collect();
    let mut numeric: Vec<DenseMatrix> = shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect();
    for (p, &(rows, cols)) in shapes.iter().enumerate() {
        for i in 0..rows * cols {
            model.named_params_mut()[p].1.as_mut_slice()[i] += H;
            let f_plus = loss(&model);
            model.named_params_mut()[p].1.as_mut_slice()[i] -= 2.0 * H;
            let f_minus = loss(&model);
            model.named_params_mut()[p].1.as_mut_slice()[i] += H;
            numeric[p].as_mut_slice()[i] = (f_plus - f_minus) / (2.0 * H);
        }
    }
    worst_disagreement(&analytic, &numeric)
}

/// Max disagreement for the link-prediction loss (GNN plus decoder stack).
pub fn lp_gradcheck(arch: Architecture, heads: usize) -> f64 {
    let g = fixture_graph();
    let features = fixture_features(8, 5, 77);
    let ctx = GraphContext::new(g, &features, true);
    let pairs = vec![(0u32, 1u32), (2, 3), (4, 5), (0, 3), (1, 7), (2, 6)];
    let targets: Arc<Vec<f64>> = Arc::new(vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let cfg = config(arch, heads);
    let mut model = GnnModel::init(&cfg, 5, cfg.hidden_dim).expect("valid fixture config");
    let mut decoder = LinkDecoder::init(2 * cfg.hidden_dim, cfg.seed);

    let loss = |model: &GnnModel, decoder: &LinkDecoder| -> f64 {
        let mut tape = Tape::new();
        let (z, _) = model.forward(&mut tape, &ctx, false, 0);
        let (logits, _) = decoder.forward(&mut tape, z, &pairs);
        let l = tape.bce_with_logits(logits, Arc::clone(&targets));
        tape.scalar(l)
    };

    let analytic: Vec<DenseMatrix> = {
        let mut tape = Tape::new();
        let (z, mut ids) = model.forward(&mut tape, &ctx, false, 0);
        let (logits, dec_ids) = decoder.forward(&mut tape, z, &pairs);
        ids.extend(dec_ids);
        let l = tape.bce_with_logits(logits, Arc::clone(&targets));
        tape.backward(l).expect("fresh tape");
        ids.iter()
            .map(|&id| {
                let v = tape.value(id);
                tape.grad(id)
                    .cloned()
                    .unwrap_or_else(|| DenseMatrix::zeros(v.rows(), v.cols()))
            })
            .collect()
    };

    let model_count = model.named_params().len();
    let shapes: Vec<(usize, usize)> = model
        .named_params()
        .iter()
        .chain(decoder.named_params().iter())
        .map(|(_, p)| (p.rows(), p.cols()))
        .collect();
    let mut numeric: Vec<DenseMatrix> = shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect();
    for (p, &(rows, cols)) in shapes.iter().enumerate() {
        for i in 0..rows * cols {
            let nudge = |m: &mut GnnModel, d: &mut LinkDecoder, delta: f64| {
                if p < model_count {
                    m.named_params_mut()[p].1.as_mut_slice()[i] += delta;
                } else {
                    d.named_params_mut()[p - model_count].1.as_mut_slice()[i] += delta;
                }
            };
            nudge(&mut model, &mut decoder, H);
            let f_plus = loss(&model, &decoder);
            nudge(&mut model, &mut decoder, -2.0 * H);
            let f_minus = loss(&model, &decoder);
            nudge(&mut model, &mut decoder, H);
            numeric[p].as_mut_slice()[i] = (f_plus - f_minus) / (2.0 * H);
        }
    }
    worst_disagreement(&analytic, &numeric)
}
