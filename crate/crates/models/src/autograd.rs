//! Minimal reverse-mode tape over dense matrices.
//!
//! A forward pass records one node per operation; `backward` walks the tape
//! in reverse and accumulates gradients into every node flagged as requiring
//! them. The op set is exactly what the three GNN architectures and their
//! two losses need — nothing speculative.
//!
//! Graph-structured operations (sparse propagation, neighbor means, segment
//! attention) borrow their structure through `Arc`s so a tape never copies
//! an adjacency.

use std::sync::Arc;

use grl_core::graph::{Graph, NormalizedAdjacency};
use grl_core::seed;
use grl_core::DenseMatrix;
use rand::RngExt;
use rayon::prelude::*;

use crate::linalg::{dot, matmul, matmul_nt, matmul_tn};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

enum Value {
    Owned(DenseMatrix),
    Shared(Arc<DenseMatrix>),
}

impl Value {
    fn get(&self) -> &DenseMatrix {
        match self {
            Value::Owned(m) => m,
            Value::Shared(m) => m,
        }
    }
}

/// Per-node support sets for attention: each node attends over its
/// neighbors, optionally plus itself.
#[derive(Debug, Clone)]
pub struct AttentionSupport {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl AttentionSupport {
    pub fn from_graph(g: &Graph, include_self: bool) -> Self {
        let n = g.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let mut self_written = !include_self;
            for &j in g.neighbors(i) {
                if !self_written && (j as usize) > i {
                    targets.push(i as u32);
                    self_written = true;
                }
                targets.push(j);
            }
            if !self_written {
                targets.push(i as u32);
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Nodes attended from `i`, ascending.
    pub fn support(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn total_slots(&self) -> usize {
        self.targets.len()
    }

    pub fn slot_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

enum Op {
    Leaf,
    MatMul { a: TensorId, b: TensorId },
    Spmm { s: Arc<NormalizedAdjacency>, x: TensorId },
    NeighborMean { g: Arc<Graph>, x: TensorId },
    ConcatCols { a: TensorId, b: TensorId },
    Add { a: TensorId, b: TensorId },
    AddRowBias { a: TensorId, bias: TensorId },
    Scale { a: TensorId, factor: f64 },
    Relu { a: TensorId },
    LeakyRelu { a: TensorId, slope: f64 },
    Sigmoid { a: TensorId },
    Dropout { a: TensorId, rate: f64, seed: u64 },
    GatherRows { a: TensorId, indices: Arc<Vec<usize>> },
    SegmentAttention {
        support: Arc<AttentionSupport>,
        values: TensorId,
        src_scores: TensorId,
        dst_scores: TensorId,
        slope: f64,
        /// Aggregate the node's own row instead of its neighbors'; the
        /// softmax weights then sum out and attention gradients vanish.
        aggregate_self: bool,
        alpha: Vec<f64>,
        raw: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: TensorId,
        labels: Arc<Vec<usize>>,
        probs: DenseMatrix,
    },
    BceWithLogits {
        logits: TensorId,
        targets: Arc<Vec<f64>>,
        probs: Vec<f64>,
    },
}

struct Node {
    value: Value,
    grad: Option<DenseMatrix>,
    requires_grad: bool,
    op: Op,
}

/// Recorded forward pass. One-shot: after `backward` the tape only serves
/// gradient reads.
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: DenseMatrix, requires_grad: bool, op: Op) -> TensorId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            grad: None,
            requires_grad,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn value_of(&self, id: TensorId) -> &DenseMatrix {
        self.nodes[id.0].value.get()
    }

    fn needs_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn value(&self, id: TensorId) -> &DenseMatrix {
        self.value_of(id)
    }

    pub fn scalar(&self, id: TensorId) -> f64 {
        let v = self.value_of(id);
        debug_assert_eq!((v.rows(), v.cols()), (1, 1));
        v.get(0, 0)
    }

    pub fn grad(&self, id: TensorId) -> Option<&DenseMatrix> {
        self.nodes[id.0].grad.as_ref()
    }

    /// Trainable leaf (parameters).
    pub fn param(&mut self, value: DenseMatrix) -> TensorId {
        self.push(value, true, Op::Leaf)
    }

    /// Constant leaf, stored without copying.
    pub fn constant(&mut self, value: Arc<DenseMatrix>) -> TensorId {
        self.nodes.push(Node {
            value: Value::Shared(value),
            grad: None,
            requires_grad: false,
            op: Op::Leaf,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let value = matmul(self.value_of(a), self.value_of(b));
        let rg = self.needs_grad(a) || self.needs_grad(b);
        self.push(value, rg, Op::MatMul { a, b })
    }

    /// Sparse symmetric propagation `S * X`.
    pub fn spmm(&mut self, s: &Arc<NormalizedAdjacency>, x: TensorId) -> TensorId {
        let value = spmm_dense(s, self.value_of(x));
        let rg = self.needs_grad(x);
        self.push(value, rg, Op::Spmm { s: Arc::clone(s), x })
    }

    /// Row `i` of the output is the mean of `x`'s rows over `i`'s neighbors;
    /// zero for isolated nodes.
    pub fn neighbor_mean(&mut self, g: &Arc<Graph>, x: TensorId) -> TensorId {
        let value = neighbor_mean_dense(g, self.value_of(x));
        let rg = self.needs_grad(x);
        self.push(value, rg, Op::NeighborMean { g: Arc::clone(g), x })
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ma, mb) = (self.value_of(a), self.value_of(b));
        assert_eq!(ma.rows(), mb.rows(), "concat_cols row mismatch");
        let mut out = DenseMatrix::zeros(ma.rows(), ma.cols() + mb.cols());
        for i in 0..ma.rows() {
            let row = out.row_mut(i);
            row[..ma.cols()].copy_from_slice(ma.row(i));
            row[ma.cols()..].copy_from_slice(mb.row(i));
        }
        let rg = self.needs_grad(a) || self.needs_grad(b);
        self.push(out, rg, Op::ConcatCols { a, b })
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ma, mb) = (self.value_of(a), self.value_of(b));
        assert_eq!((ma.rows(), ma.cols()), (mb.rows(), mb.cols()), "add shape");
        let mut out = ma.clone();
        for (o, &v) in out.as_mut_slice().iter_mut().zip(mb.as_slice()) {
            *o += v;
        }
        let rg = self.needs_grad(a) || self.needs_grad(b);
        self.push(out, rg, Op::Add { a, b })
    }

    /// Broadcast a `1 x c` bias over every row.
    pub fn add_row_bias(&mut self, a: TensorId, bias: TensorId) -> TensorId {
        let (ma, mb) = (self.value_of(a), self.value_of(bias));
        assert_eq!(mb.rows(), 1, "bias must be a single row");
        assert_eq!(ma.cols(), mb.cols(), "bias width");
        let mut out = ma.clone();
        for i in 0..out.rows() {
            for (o, &v) in out.row_mut(i).iter_mut().zip(mb.row(0)) {
                *o += v;
            }
        }
        let rg = self.needs_grad(a) || self.needs_grad(bias);
        self.push(out, rg, Op::AddRowBias { a, bias })
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let mut out = self.value_of(a).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::Scale { a, factor })
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let mut out = self.value_of(a).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::Relu { a })
    }

    pub fn leaky_relu(&mut self, a: TensorId, slope: f64) -> TensorId {
        let mut out = self.value_of(a).clone();
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = if *v > 0.0 { *v } else { slope * *v });
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::LeakyRelu { a, slope })
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let mut out = self.value_of(a).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::Sigmoid { a })
    }

    /// Inverted dropout. The mask is a pure function of `seed` and is
    /// regenerated during backward instead of stored.
    pub fn dropout(&mut self, a: TensorId, rate: f64, seed: u64) -> TensorId {
        assert!((0.0..1.0).contains(&rate), "dropout rate in [0, 1)");
        if rate == 0.0 {
            return a;
        }
        let mut out = self.value_of(a).clone();
        apply_dropout_mask(&mut out, rate, seed);
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::Dropout { a, rate, seed })
    }

    pub fn gather_rows(&mut self, a: TensorId, indices: Arc<Vec<usize>>) -> TensorId {
        let ma = self.value_of(a);
        let mut out = DenseMatrix::zeros(indices.len(), ma.cols());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(ma.row(i));
        }
        let rg = self.needs_grad(a);
        self.push(out, rg, Op::GatherRows { a, indices })
    }

    /// Attention aggregation: per node `i`, scores `e_ij =
    /// leaky_relu(src[i] + dst[j])` over its support, softmax-normalized,
    /// then `out_i = sum_j alpha_ij * values_j`.
    pub fn segment_attention(
        &mut self,
        support: &Arc<AttentionSupport>,
        values: TensorId,
        src_scores: TensorId,
        dst_scores: TensorId,
        slope: f64,
        aggregate_self: bool,
    ) -> TensorId {
        let (out, alpha, raw) = segment_attention_forward(
            support,
            self.value_of(values),
            self.value_of(src_scores),
            self.value_of(dst_scores),
            slope,
            aggregate_self,
        );
        let rg = self.needs_grad(values) || self.needs_grad(src_scores) || self.needs_grad(dst_scores);
        self.push(
            out,
            rg,
            Op::SegmentAttention {
                support: Arc::clone(support),
                values,
                src_scores,
                dst_scores,
                slope,
                aggregate_self,
                alpha,
                raw,
            },
        )
    }

    /// Normalized attention coefficients of a recorded attention node, in
    /// support-slot order.
    pub fn attention_coefficients(&self, id: TensorId) -> Option<&[f64]> {
        match &self.nodes[id.0].op {
            Op::SegmentAttention { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Mean softmax cross-entropy of `logits` rows against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: TensorId, labels: Arc<Vec<usize>>) -> TensorId {
        let l = self.value_of(logits);
        assert_eq!(l.rows(), labels.len(), "one label per logit row");
        let mut probs = l.clone();
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = probs.row_mut(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
            loss -= row[label].max(1e-300).ln();
        }
        loss /= labels.len() as f64;
        let rg = self.needs_grad(logits);
        self.push(
            DenseMatrix::from_vec(1, 1, vec![loss]),
            rg,
            Op::SoftmaxCrossEntropy { logits, labels, probs },
        )
    }

    /// Mean binary cross-entropy over a column of logits, stable form.
    pub fn bce_with_logits(&mut self, logits: TensorId, targets: Arc<Vec<f64>>) -> TensorId {
        let l = self.value_of(logits);
        assert_eq!(l.cols(), 1, "logits must be a column");
        assert_eq!(l.rows(), targets.len(), "one target per logit");
        let mut probs = Vec::with_capacity(targets.len());
        let mut loss = 0.0;
        for (i, &y) in targets.iter().enumerate() {
            let x = l.get(i, 0);
            loss += x.max(0.0) - x * y + (1.0 + (-x.abs()).exp()).ln();
            probs.push(sigmoid(x));
        }
        loss /= targets.len() as f64;
        let rg = self.needs_grad(logits);
        self.push(
            DenseMatrix::from_vec(1, 1, vec![loss]),
            rg,
            Op::BceWithLogits { logits, targets, probs },
        )
    }

    /// Reverse pass from a scalar root. Errors if called twice on one tape.
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        if self.consumed {
            return Err(ModelError::BackwardConsumed);
        }
        self.consumed = true;
        {
            let root_node = &self.nodes[root.0];
            let v = root_node.value.get();
            if (v.rows(), v.cols()) != (1, 1) {
                return Err(ModelError::ShapeMismatch {
                    context: "backward root",
                    expected: "1x1 scalar".into(),
                    got: format!("{}x{}", v.rows(), v.cols()),
                });
            }
        }
        self.accumulate(root, DenseMatrix::from_vec(1, 1, vec![1.0]));
        for idx in (0..=root.0).rev() {
            if self.nodes[idx].grad.is_none() || !self.nodes[idx].requires_grad {
                continue;
            }
            let grad = self.nodes[idx].grad.clone().expect("checked above");
            self.backprop_node(idx, &grad);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: TensorId, grad: DenseMatrix) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.nodes[id.0].grad {
            Some(existing) => {
                for (o, &v) in existing.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *o += v;
                }
            }
            slot @ None => *slot = Some(grad),
        }
    }

    fn backprop_node(&mut self, idx: usize, grad: &DenseMatrix) {
        // The op is moved out structurally via references; keep the borrow
        // local by computing parent gradients first, then accumulating.
        enum Pending {
            One(TensorId, DenseMatrix),
            Two((TensorId, DenseMatrix), (TensorId, DenseMatrix)),
            Three((TensorId, DenseMatrix), (TensorId, DenseMatrix), (TensorId, DenseMatrix)),
            None,
        }
        let pending = match &self.nodes[idx].op {
            Op::Leaf => Pending::None,
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let ga = self
                    .needs_grad(a)
                    .then(|| matmul_nt(grad, self.value_of(b)));
                let gb = self
                    .needs_grad(b)
                    .then(|| matmul_tn(self.value_of(a), grad));
                match (ga, gb) {
                    (Some(ga), Some(gb)) => Pending::Two((a, ga), (b, gb)),
                    (Some(ga), None) => Pending::One(a, ga),
                    (None, Some(gb)) => Pending::One(b, gb),
                    (None, None) => Pending::None,
                }
            }
            Op::Spmm { s, x } => {
                // S is symmetric, so the adjoint is another spmm.
                Pending::One(*x, spmm_dense(s, grad))
            }
            Op::NeighborMean { g, x } => {
                let x = *x;
                let n = g.node_count();
                let cols = grad.cols();
                let mut gx = DenseMatrix::zeros(n, cols);
                for j in 0..n {
                    let out_row = gx.row_mut(j);
                    for &i in g.neighbors(j) {
                        let i = i as usize;
                        let deg = g.degree(i) as f64;
                        for (o, &gv) in out_row.iter_mut().zip(grad.row(i)) {
                            *o += gv / deg;
                        }
                    }
                }
                Pending::One(x, gx)
            }
            Op::ConcatCols { a, b } => {
                let (a, b) = (*a, *b);
                let ca = self.value_of(a).cols();
                let cb = self.value_of(b).cols();
                let rows = grad.rows();
                let mut ga = DenseMatrix::zeros(rows, ca);
                let mut gb = DenseMatrix::zeros(rows, cb);
                for i in 0..rows {
                    ga.row_mut(i).copy_from_slice(&grad.row(i)[..ca]);
                    gb.row_mut(i).copy_from_slice(&grad.row(i)[ca..]);
                }
                Pending::Two((a, ga), (b, gb))
            }
            Op::Add { a, b } => Pending::Two((*a, grad.clone()), (*b, grad.clone())),
            Op::AddRowBias { a, bias } => {
                let mut gbias = DenseMatrix::zeros(1, grad.cols());
                for i in 0..grad.rows() {
                    for (o, &v) in gbias.row_mut(0).iter_mut().zip(grad.row(i)) {
                        *o += v;
                    }
                }
                Pending::Two((*a, grad.clone()), (*bias, gbias))
            }
            Op::Scale { a, factor } => {
                let mut ga = grad.clone();
                let factor = *factor;
                ga.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
                Pending::One(*a, ga)
            }
            Op::Relu { a } => {
                let a = *a;
                let mut ga = grad.clone();
                for (g, &x) in ga.as_mut_slice().iter_mut().zip(self.value_of(a).as_slice()) {
                    if x <= 0.0 {
                        *g = 0.0;
                    }
                }
                Pending::One(a, ga)
            }
            Op::LeakyRelu { a, slope } => {
                let (a, slope) = (*a, *slope);
                let mut ga = grad.clone();
                for (g, &x) in ga.as_mut_slice().iter_mut().zip(self.value_of(a).as_slice()) {
                    if x <= 0.0 {
                        *g *= slope;
                    }
                }
                Pending::One(a, ga)
            }
            Op::Sigmoid { a } => {
                let a = *a;
                let mut ga = grad.clone();
                let out = self.nodes[idx].value.get();
                for (g, &y) in ga.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    *g *= y * (1.0 - y);
                }
                Pending::One(a, ga)
            }
            Op::Dropout { a, rate, seed } => {
                let mut ga = grad.clone();
                apply_dropout_mask(&mut ga, *rate, *seed);
                Pending::One(*a, ga)
            }
            Op::GatherRows { a, indices } => {
                let a = *a;
                let src = self.value_of(a);
                let mut ga = DenseMatrix::zeros(src.rows(), src.cols());
                for (r, &i) in indices.iter().enumerate() {
                    for (o, &v) in ga.row_mut(i).iter_mut().zip(grad.row(r)) {
                        *o += v;
                    }
                }
                Pending::One(a, ga)
            }
            Op::SegmentAttention {
                support,
                values,
                src_scores,
                dst_scores,
                slope,
                aggregate_self,
                alpha,
                raw,
            } => {
                let (values, src_scores, dst_scores) = (*values, *src_scores, *dst_scores);
                let z = self.value_of(values);
                let n = support.node_count();
                let cols = z.cols();
                let mut gz = DenseMatrix::zeros(z.rows(), cols);
                let mut gs = DenseMatrix::zeros(n, 1);
                let mut gt = DenseMatrix::zeros(n, 1);
                for i in 0..n {
                    let slots = support.slot_range(i);
                    let sup = support.support(i);
                    let g_out = grad.row(i);
                    // d loss / d alpha_ij and value gradients.
                    let mut dalpha = Vec::with_capacity(sup.len());
                    for (slot, &j) in slots.clone().zip(sup) {
                        let j = j as usize;
                        let a = alpha[slot];
                        let zrow = if *aggregate_self { z.row(i) } else { z.row(j) };
                        dalpha.push(dot(g_out, zrow));
                        let target = if *aggregate_self { i } else { j };
                        for (o, &gv) in gz.row_mut(target).iter_mut().zip(g_out) {
                            *o += a * gv;
                        }
                    }
                    // Softmax backward within the segment.
                    let inner: f64 = slots
                        .clone()
                        .zip(&dalpha)
                        .map(|(slot, &da)| alpha[slot] * da)
                        .sum();
                    for ((slot, &j), &da) in slots.clone().zip(sup).zip(&dalpha) {
                        let de = alpha[slot] * (da - inner);
                        let dr = if raw[slot] > 0.0 { de } else { de * slope };
                        *gs.row_mut(i).first_mut().expect("1 col") += dr;
                        *gt.row_mut(j as usize).first_mut().expect("1 col") += dr;
                    }
                }
                Pending::Three((values, gz), (src_scores, gs), (dst_scores, gt))
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let logits = *logits;
                let scale = grad.get(0, 0) / labels.len() as f64;
                let mut gl = probs.clone();
                for (i, &label) in labels.iter().enumerate() {
                    let row = gl.row_mut(i);
                    row[label] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                Pending::One(logits, gl)
            }
            Op::BceWithLogits { logits, targets, probs } => {
                let logits = *logits;
                let scale = grad.get(0, 0) / targets.len() as f64;
                let mut gl = DenseMatrix::zeros(targets.len(), 1);
                for (i, (&p, &y)) in probs.iter().zip(targets.iter()).enumerate() {
                    gl.set(i, 0, (p - y) * scale);
                }
                Pending::One(logits, gl)
            }
        };
        match pending {
            Pending::None => {}
            Pending::One(id, g) => self.accumulate(id, g),
            Pending::Two((a, ga), (b, gb)) => {
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Pending::Three((a, ga), (b, gb), (c, gc)) => {
                self.accumulate(a, ga);
                self.accumulate(b, gb);
                self.accumulate(c, gc);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn spmm_dense(s: &NormalizedAdjacency, x: &DenseMatrix) -> DenseMatrix {
    assert_eq!(s.node_count(), x.rows(), "spmm shape");
    let cols = x.cols();
    let mut out = DenseMatrix::zeros(s.node_count(), cols);
    let run = |(i, out_row): (usize, &mut [f64])| {
        for (j, v) in s.row(i) {
            for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                *o += v * xv;
            }
        }
    };
    if s.node_count() * cols >= 1 << 14 {
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(run);
    } else {
        for (i, row) in out.as_mut_slice().chunks_mut(cols).enumerate() {
            run((i, row));
        }
    }
    out
}

fn neighbor_mean_dense(g: &Graph, x: &DenseMatrix) -> DenseMatrix {
    assert_eq!(g.node_count(), x.rows(), "neighbor_mean shape");
    let cols = x.cols();
    let mut out = DenseMatrix::zeros(g.node_count(), cols);
    let run = |(i, out_row): (usize, &mut [f64])| {
        let deg = g.degree(i);
        if deg == 0 {
            return;
        }
        for &j in g.neighbors(i) {
            for (o, &xv) in out_row.iter_mut().zip(x.row(j as usize)) {
                *o += xv;
            }
        }
        let inv = 1.0 / deg as f64;
        out_row.iter_mut().for_each(|v| *v *= inv);
    };
    if g.node_count() * cols >= 1 << 14 {
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(run);
    } else {
        for (i, row) in out.as_mut_slice().chunks_mut(cols).enumerate() {
            run((i, row));
        }
    }
    out
}

fn apply_dropout_mask(m: &mut DenseMatrix, rate: f64, seed: u64) {
    let keep = 1.0 - rate;
    let inv_keep = 1.0 / keep;
    let cols = m.cols();
    m.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            // Per-row streams keep the mask identical however rows are scheduled.
            let mut rng = seed::rng(seed::mix_index(seed, i as u64));
            for v in row.iter_mut() {
                if rng.random::<f64>() < rate {
                    *v = 0.0;
                } else {
                    *v *= inv_keep;
                }
            }
        });
}

/// Shared forward path for attention, also used to inspect coefficients
/// without recording a tape. Returns `(aggregated, alpha, raw_scores)` with
/// the per-slot vectors in support order.
pub fn segment_attention_forward(
    support: &AttentionSupport,
    values: &DenseMatrix,
    src_scores: &DenseMatrix,
    dst_scores: &DenseMatrix,
    slope: f64,
    aggregate_self: bool,
) -> (DenseMatrix, Vec<f64>, Vec<f64>) {
    let n = support.node_count();
    assert_eq!(values.rows(), n, "attention values shape");
    assert_eq!((src_scores.rows(), src_scores.cols()), (n, 1));
    assert_eq!((dst_scores.rows(), dst_scores.cols()), (n, 1));
    let mut alpha = vec![0.0; support.total_slots()];
    let mut raw = vec![0.0; support.total_slots()];
    let mut out = DenseMatrix::zeros(n, values.cols());
    for i in 0..n {
        let sup = support.support(i);
        if sup.is_empty() {
            continue;
        }
        let slots = support.slot_range(i);
        let mut max_e = f64::NEG_INFINITY;
        for (slot, &j) in slots.clone().zip(sup) {
            let r = src_scores.get(i, 0) + dst_scores.get(j as usize, 0);
            raw[slot] = r;
            let e = if r > 0.0 { r } else { slope * r };
            alpha[slot] = e;
            max_e = max_e.max(e);
        }
        let mut z = 0.0;
        for slot in slots.clone() {
            alpha[slot] = (alpha[slot] - max_e).exp();
            z += alpha[slot];
        }
        let out_row = out.row_mut(i);
        for (slot, &j) in slots.zip(sup) {
            alpha[slot] /= z;
            let src_row = if aggregate_self { values.row(i) } else { values.row(j as usize) };
            for (o, &v) in out_row.iter_mut().zip(src_row) {
                *o += alpha[slot] * v;
            }
        }
    }
    (out, alpha, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use grl_core::graph::build_graph;

    #[test]
    fn square_gradient_is_two_x() {
        // x^2 via matmul of 1x1s: d/dx = 2x = 6 at x = 3.
        let mut tape = Tape::new();
        let x = tape.param(DenseMatrix::from_vec(1, 1, vec![3.0]));
        let y = tape.matmul(x, x);
        // Reduce to scalar through BCE-free path: y already 1x1.
        tape.backward(y).unwrap();
        let g = tape.grad(x).unwrap();
        assert!((g.get(0, 0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn backward_twice_errors() {
        let mut tape = Tape::new();
        let x = tape.param(DenseMatrix::from_vec(1, 1, vec![2.0]));
        let y = tape.matmul(x, x);
        tape.backward(y).unwrap();
        assert!(matches!(tape.backward(y), Err(ModelError::BackwardConsumed)));
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.param(DenseMatrix::zeros(2, 2));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn dropout_mask_is_reproducible_and_scales() {
        let m = Arc::new(DenseMatrix::from_vec(4, 8, vec![1.0; 32]));
        let mut tape = Tape::new();
        let x = tape.constant(Arc::clone(&m));
        let d1 = tape.dropout(x, 0.5, 42);
        let v1 = tape.value(d1).clone();
        let mut tape2 = Tape::new();
        let x2 = tape2.constant(m);
        let d2 = tape2.dropout(x2, 0.5, 42);
        assert_eq!(&v1, tape2.value(d2));
        for &v in v1.as_slice() {
            assert!(v == 0.0 || (v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_coefficients_sum_to_one() {
        let g = Arc::new(build_graph(&[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap());
        let sup = Arc::new(AttentionSupport::from_graph(&g, true));
        let n = g.node_count();
        let values = DenseMatrix::from_vec(n, 2, (0..2 * n).map(|v| v as f64 * 0.3 - 1.0).collect());
        let src = DenseMatrix::from_vec(n, 1, vec![0.2, -0.4, 0.9, 0.05]);
        let dst = DenseMatrix::from_vec(n, 1, vec![-0.7, 0.3, 0.1, 0.6]);
        let (_, alpha, _) = segment_attention_forward(&sup, &values, &src, &dst, 0.2, false);
        for i in 0..n {
            let total: f64 = sup.slot_range(i).map(|s| alpha[s]).sum();
            assert!((total - 1.0).abs() < 1e-9, "node {i}: {total}");
        }
    }

    #[test]
    fn attention_uniform_when_scores_equal() {
        let g = Arc::new(build_graph(&[(0, 1), (1, 2)]).unwrap());
        let sup = Arc::new(AttentionSupport::from_graph(&g, true));
        let values = DenseMatrix::zeros(3, 2);
        let src = DenseMatrix::zeros(3, 1);
        let dst = DenseMatrix::zeros(3, 1);
        let (_, alpha, _) = segment_attention_forward(&sup, &values, &src, &dst, 0.2, false);
        // Node 1 attends over {0, 1, 2}; all equal scores give 1/3 each.
        for slot in sup.slot_range(1) {
            assert!((alpha[slot] - 1.0 / 3.0).abs() < 1e-12);
        }
        // Node 0 attends over {self, 1}: 1/2 each.
        for slot in sup.slot_range(0) {
            assert!((alpha[slot] - 0.5).abs() < 1e-12);
        }
    }
}
