use std::sync::Arc;

use rand::Rng;

use super::tensor::gemm;
use super::{SparseAdjacency, Tensor};
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseAdjacency>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Elu(Var, f64),
    RowSoftmax(Var),
    Dropout(Var, Vec<f64>),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    ScaleRows(Var, Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    RowDot(Var, Var),
    SliceRows(Var, usize),
    Sum(Var),
    Mean(Var),
    SoftmaxCrossEntropy(Var, Tensor, Tensor),
    BceWithLogits(Var, Vec<f64>),
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Records a forward computation so gradients can be propagated back
/// through it. A tape is built fresh for every forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads[v.0].take()
    }
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Tensor>], v: Var) -> &'a mut Tensor {
    let (r, c) = nodes[v.0].value.shape();
    grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c))
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return shape_err(format!("{what}: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// `y ⊙ (g − ⟨g, y⟩)`, the softmax Jacobian-vector product.
fn softmax_backward(y: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, yi), gi) in out.iter_mut().zip(y).zip(g) {
        *o += yi * (gi - dot);
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            requires_grad: true,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            requires_grad: false,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn spmm(&mut self, adj: &Arc<SparseAdjacency>, h: Var) -> Result<Var> {
        let out = adj.spmm(self.value(h))?;
        Ok(self.push(out, Op::SpMM(Arc::clone(adj), h), &[h]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(x, y, "add")?;
        let mut out = x.clone();
        out.add_assign(y);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return shape_err(format!("add_row: {:?} + {:?}", x.shape(), b.shape()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, bb) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias), &[a, bias]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c), &[a])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(x, y, "mul")?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    /// ELU with the given alpha.
    pub fn elu(&mut self, a: Var, alpha: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { alpha * x.exp_m1() });
        self.push(out, Op::Elu(a, alpha), &[a])
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::RowSoftmax(a), &[a])
    }

    /// Inverted dropout. Identity (no new node) outside training or when
    /// `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let x = self.value(a);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        Ok(self.push(out, Op::Dropout(a, mask), &[a]))
    }

    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Result<Var> {
        let idx = idx.into();
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return shape_err(format!("gather row {bad} of {}", x.rows()));
        }
        let out = x.select_rows(&idx);
        Ok(self.push(out, Op::GatherRows(a, idx), &[a]))
    }

    /// `out[idx[i]] += a[i]` into an `n`-row result.
    pub fn scatter_add_rows(&mut self, a: Var, idx: impl Into<Arc<[usize]>>, n: usize) -> Result<Var> {
        let idx = idx.into();
        let x = self.value(a);
        if idx.len() != x.rows() {
            return shape_err(format!("scatter {} indices for {} rows", idx.len(), x.rows()));
        }
        if idx.iter().any(|&i| i >= n) {
            return shape_err("scatter index out of range");
        }
        let mut out = Tensor::zeros(n, x.cols());
        for (i, &dst) in idx.iter().enumerate() {
            for (o, v) in out.row_mut(dst).iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::ScatterAddRows(a, idx), &[a]))
    }

    /// Multiplies row `i` of `a` by `w[i]`, with `w` an `rows x 1` column.
    pub fn scale_rows(&mut self, a: Var, w: Var) -> Result<Var> {
        let (x, s) = (self.value(a), self.value(w));
        if s.cols() != 1 || s.rows() != x.rows() {
            return shape_err(format!("scale_rows {:?} by {:?}", x.shape(), s.shape()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            let f = s.data()[r];
            for o in out.row_mut(r) {
                *o *= f;
            }
        }
        Ok(self.push(out, Op::ScaleRows(a, w), &[a, w]))
    }

    /// Softmax over contiguous segments of a column vector.
    /// `offsets` has one more entry than there are segments.
    pub fn segment_softmax(&mut self, a: Var, offsets: impl Into<Arc<[usize]>>) -> Result<Var> {
        let offsets = offsets.into();
        let x = self.value(a);
        if x.cols() != 1 || offsets.last().copied().unwrap_or(0) != x.rows() || offsets.first().is_some_and(|&o| o != 0) {
            return shape_err("segment_softmax offsets do not cover the column");
        }
        let mut out = x.clone();
        for w in offsets.windows(2) {
            if w[1] < w[0] {
                return shape_err("segment offsets must be non-decreasing");
            }
            softmax_in_place(&mut out.data_mut()[w[0]..w[1]]);
        }
        Ok(self.push(out, Op::SegmentSoftmax(a, offsets), &[a]))
    }

    /// Row-wise inner products, giving a `rows x 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(x, y, "row_dot")?;
        let data = (0..x.rows())
            .map(|r| x.row(r).iter().zip(y.row(r)).map(|(p, q)| p * q).sum())
            .collect();
        Ok(self.push(Tensor::column(data), Op::RowDot(a, b), &[a, b]))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() {
            return shape_err(format!("slice rows {start}..{} of {}", start + len, x.rows()));
        }
        let idx: Vec<usize> = (start..start + len).collect();
        let out = x.select_rows(&idx);
        Ok(self.push(out, Op::SliceRows(a, start), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::scalar(x.sum() / x.len().max(1) as f64);
        self.push(out, Op::Mean(a), &[a])
    }

    /// Mean over rows of `-Σ_c t_c log softmax(logits)_c`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let x = self.value(logits);
        same_shape(x, targets, "softmax_cross_entropy")?;
        let mut probs = x.clone();
        let mut total = 0.0;
        for r in 0..x.rows() {
            let row = x.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total -= row.iter().zip(targets.row(r)).map(|(v, t)| t * (v - lse)).sum::<f64>();
            softmax_in_place(probs.row_mut(r));
        }
        let out = Tensor::scalar(total / x.rows().max(1) as f64);
        Ok(self.push(out, Op::SoftmaxCrossEntropy(logits, targets.clone(), probs), &[logits]))
    }

    /// Mean binary cross-entropy of logits against 0/1 labels.
    pub fn bce_with_logits(&mut self, scores: Var, labels: &[f64]) -> Result<Var> {
        let x = self.value(scores);
        if x.len() != labels.len() {
            return shape_err(format!("bce: {} scores, {} labels", x.len(), labels.len()));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(labels)
            .map(|(&s, &y)| s.max(0.0) - s * y + (-s.abs()).exp().ln_1p())
            .sum();
        let out = Tensor::scalar(total / labels.len().max(1) as f64);
        Ok(self.push(out, Op::BceWithLogits(scores, labels.to_vec()), &[scores]))
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(x, y, "mse")?;
        let total: f64 = x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum();
        let out = Tensor::scalar(total / x.len().max(1) as f64);
        Ok(self.push(out, Op::Mse(a, b), &[a, b]))
    }

    /// Reverse pass seeded with ones at `root` (so a non-scalar root is
    /// differentiated through its sum).
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[root.0].requires_grad {
            return Gradients { grads };
        }
        let (r, c) = self.nodes[root.0].value.shape();
        grads[root.0] = Some(Tensor::full(r, c, 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn backward_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].requires_grad;
        let val = |v: Var| &nodes[v.0].value;
        macro_rules! acc {
            ($v:expr) => {
                slot(nodes, grads, $v)
            };
        }
        let elementwise = |dst: &mut Tensor, f: &dyn Fn(usize) -> f64| {
            for (j, d) in dst.data_mut().iter_mut().enumerate() {
                *d += g.data()[j] * f(j);
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    gemm(false, g, true, val(*b), acc!(*a), 1.0);
                }
                if wants(*b) {
                    gemm(true, val(*a), false, g, acc!(*b), 1.0);
                }
            }
            Op::SpMM(adj, h) => adj.spmm_transpose_into(g, acc!(*h)),
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        acc!(v).add_assign(g);
                    }
                }
            }
            Op::AddRow(a, bias) => {
                if wants(*a) {
                    acc!(*a).add_assign(g);
                }
                if wants(*bias) {
                    let dst = acc!(*bias);
                    for r in 0..g.rows() {
                        for (d, x) in dst.data_mut().iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Scale(a, c) => elementwise(acc!(*a), &|_| *c),
            Op::Mul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if wants(*a) {
                    elementwise(acc!(*a), &|j| y.data()[j]);
                }
                if wants(*b) {
                    elementwise(acc!(*b), &|j| x.data()[j]);
                }
            }
            Op::Relu(a) => {
                let x = val(*a);
                elementwise(acc!(*a), &|j| if x.data()[j] > 0.0 { 1.0 } else { 0.0 });
            }
            Op::LeakyRelu(a, slope) => {
                let x = val(*a);
                elementwise(acc!(*a), &|j| if x.data()[j] > 0.0 { 1.0 } else { *slope });
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                elementwise(acc!(*a), &|j| y.data()[j] * (1.0 - y.data()[j]));
            }
            Op::Elu(a, alpha) => {
                let x = val(*a);
                elementwise(acc!(*a), &|j| {
                    let v = x.data()[j];
                    if v > 0.0 {
                        1.0
                    } else {
                        alpha * v.exp()
                    }
                });
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let dst = acc!(*a);
                for r in 0..y.rows() {
                    softmax_backward(y.row(r), g.row(r), dst.row_mut(r));
                }
            }
            Op::Dropout(a, mask) => elementwise(acc!(*a), &|j| mask[j]),
            Op::GatherRows(a, idx) => {
                let dst = acc!(*a);
                for (i, &src) in idx.iter().enumerate() {
                    for (d, x) in dst.row_mut(src).iter_mut().zip(g.row(i)) {
                        *d += x;
                    }
                }
            }
            Op::ScatterAddRows(a, idx) => {
                let dst = acc!(*a);
                for (i, &row) in idx.iter().enumerate() {
                    for (d, x) in dst.row_mut(i).iter_mut().zip(g.row(row)) {
                        *d += x;
                    }
                }
            }
            Op::ScaleRows(a, w) => {
                let (x, s) = (val(*a), val(*w));
                if wants(*a) {
                    let dst = acc!(*a);
                    for r in 0..x.rows() {
                        let f = s.data()[r];
                        for (d, gg) in dst.row_mut(r).iter_mut().zip(g.row(r)) {
                            *d += f * gg;
                        }
                    }
                }
                if wants(*w) {
                    let dst = acc!(*w);
                    for r in 0..x.rows() {
                        dst.data_mut()[r] += x.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum::<f64>();
                    }
                }
            }
            Op::SegmentSoftmax(a, offsets) => {
                let y = &node.value;
                let dst = acc!(*a);
                for w in offsets.windows(2) {
                    let span = w[0]..w[1];
                    softmax_backward(
                        &y.data()[span.clone()],
                        &g.data()[span.clone()],
                        &mut dst.data_mut()[span],
                    );
                }
            }
            Op::RowDot(a, b) => {
                let (x, y) = (val(*a), val(*b));
                for (v, other) in [(*a, y), (*b, x)] {
                    if wants(v) {
                        let dst = acc!(v);
                        for r in 0..x.rows() {
                            let f = g.data()[r];
                            for (d, o) in dst.row_mut(r).iter_mut().zip(other.row(r)) {
                                *d += f * o;
                            }
                        }
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let dst = acc!(*a);
                for r in 0..g.rows() {
                    for (d, x) in dst.row_mut(start + r).iter_mut().zip(g.row(r)) {
                        *d += x;
                    }
                }
            }
            Op::Sum(a) => {
                let s = g.item();
                for d in acc!(*a).data_mut() {
                    *d += s;
                }
            }
            Op::Mean(a) => {
                let n = val(*a).len().max(1) as f64;
                let s = g.item();
                for d in acc!(*a).data_mut() {
                    *d += s / n;
                }
            }
            Op::SoftmaxCrossEntropy(a, targets, probs) => {
                let n = probs.rows().max(1) as f64;
                let s = g.item();
                let dst = acc!(*a);
                for ((d, p), t) in dst.data_mut().iter_mut().zip(probs.data()).zip(targets.data()) {
                    *d += s * (p - t) / n;
                }
            }
            Op::BceWithLogits(a, labels) => {
                let x = val(*a);
                let n = labels.len().max(1) as f64;
                let s = g.item();
                let dst = acc!(*a);
                for ((d, &v), &y) in dst.data_mut().iter_mut().zip(x.data()).zip(labels) {
                    *d += s * (sigmoid(v) - y) / n;
                }
            }
            Op::Mse(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let n = x.len().max(1) as f64;
                let s = g.item();
                for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if wants(v) {
                        let dst = acc!(v);
                        for ((d, p), q) in dst.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                            *d += sign * s * 2.0 * (p - q) / n;
                        }
                    }
                }
            }
        }
    }
}
