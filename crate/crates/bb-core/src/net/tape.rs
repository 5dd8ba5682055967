//! Reverse-mode autodiff over a recorded operation tape.
//!
//! Values are computed eagerly as nodes are appended, so the tape is
//! always topologically ordered and acyclic by construction. Every op
//! carries an explicit local gradient rule; `backward` walks the tape in
//! reverse and accumulates gradients for parameter nodes.

use super::tensor::{matmul, matmul_tn, Tensor};
use super::NetError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Constant input; gradients are not tracked.
    Input,
    /// Learnable parameter, keyed by the owning store's tensor index.
    Param(usize),
    Matmul { trans_b: bool },
    AddRowVec,
    MulRowVec,
    Add,
    Sub,
    MulElem,
    MinElem,
    Scale(f32),
    AddScalar,
    Elu,
    Sigmoid,
    Exp,
    Square,
    Clamp { lo: f32, hi: f32 },
    HuberElem { delta: f32 },
    SumAll,
    MeanAll,
    RowSum,
    WindowMeanRows { windows: usize },
    Transpose,
    RowLogSoftmax,
    DiagMean,
    RowL2Normalize,
    SliceRows { start: usize },
    ConcatRows,
    ConcatCols,
    RepeatRows { times: usize },
    EmbedSum { indices: Vec<Vec<usize>> },
    BlockAttention(AttentionSpec),
}

/// Block-causal multi-head attention over `windows` independent windows.
///
/// Q has `windows * q_len` rows; K and V have `windows * kv_len` rows.
/// Query `i` of a window attends to kv positions `j <= i + offset`, so a
/// memory prefix of length `offset` is visible to every query.
#[derive(Debug, Clone)]
pub struct AttentionSpec {
    pub windows: usize,
    pub q_len: usize,
    pub kv_len: usize,
    pub offset: usize,
    pub heads: usize,
}

struct Node {
    op: Op,
    parents: Vec<usize>,
    value: Tensor,
    needs_grad: bool,
    /// Attention keeps its softmax probabilities for the backward pass.
    aux: Option<Tensor>,
}

/// Gradients keyed by parameter-store tensor index.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub by_param: Vec<Option<Tensor>>,
}

impl Gradients {
    fn new(n_params: usize) -> Self {
        Self { by_param: vec![None; n_params] }
    }

    /// Global L2 norm across all present gradients.
    pub fn global_norm(&self) -> f64 {
        self.by_param
            .iter()
            .flatten()
            .map(|g| g.norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// Scale every gradient so the global norm does not exceed `max_norm`.
    /// Returns the pre-clip norm.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = (max_norm / norm) as f32;
            for g in self.by_param.iter_mut().flatten() {
                for v in &mut g.data {
                    *v *= s;
                }
            }
        }
        norm
    }
}

/// Recorded computation graph for one forward pass.
pub struct Tape {
    nodes: Vec<Node>,
    /// param tensor index -> node, so each parameter appears once per tape
    /// and gradient accumulation across reuse happens naturally.
    param_nodes: Vec<(usize, usize)>,
    n_params: usize,
}

impl Tape {
    pub fn new(n_params: usize) -> Self {
        Self { nodes: Vec::new(), param_nodes: Vec::new(), n_params }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, parents: Vec<usize>, value: Tensor, aux: Option<Tensor>) -> NodeId {
        let needs_grad = match op {
            Op::Input => false,
            Op::Param(_) => true,
            _ => parents.iter().any(|&p| self.nodes[p].needs_grad),
        };
        self.nodes.push(Node { op, parents, value, needs_grad, aux });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input (no gradient).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, vec![], value, None)
    }

    /// Parameter node; repeated requests for the same index return the
    /// same node.
    pub fn param(&mut self, index: usize, value: &Tensor) -> NodeId {
        if let Some(&(_, node)) = self.param_nodes.iter().find(|(p, _)| *p == index) {
            return NodeId(node);
        }
        let id = self.push(Op::Param(index), vec![], value.clone(), None);
        self.param_nodes.push((index, id.0));
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId, trans_b: bool) -> NodeId {
        let v = matmul(&self.nodes[a.0].value, &self.nodes[b.0].value, trans_b);
        self.push(Op::Matmul { trans_b }, vec![a.0, b.0], v, None)
    }

    /// `x + b` with `b` a `[1, n]` row broadcast over the rows of `x`.
    pub fn add_row_vec(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (xv, bv) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
        assert_eq!(bv.rows, 1);
        assert_eq!(bv.cols, xv.cols);
        let mut v = xv.clone();
        for r in 0..v.rows {
            let row = &mut v.data[r * v.cols..(r + 1) * v.cols];
            for (o, &bb) in row.iter_mut().zip(&bv.data) {
                *o += bb;
            }
        }
        self.push(Op::AddRowVec, vec![x.0, b.0], v, None)
    }

    /// `x * b` elementwise with `b` a `[1, n]` row broadcast.
    pub fn mul_row_vec(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (xv, bv) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
        assert_eq!(bv.rows, 1);
        assert_eq!(bv.cols, xv.cols);
        let mut v = xv.clone();
        for r in 0..v.rows {
            let row = &mut v.data[r * v.cols..(r + 1) * v.cols];
            for (o, &bb) in row.iter_mut().zip(&bv.data) {
                *o *= bb;
            }
        }
        self.push(Op::MulRowVec, vec![x.0, b.0], v, None)
    }

    fn zip_elem(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f32, f32) -> f32) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.shape(), bv.shape(), "elementwise shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect();
        let v = Tensor::from_vec(av.rows, av.cols, data);
        self.push(op, vec![a.0, b.0], v, None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elem(Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elem(Op::Sub, a, b, |x, y| x - y)
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elem(Op::MulElem, a, b, |x, y| x * y)
    }

    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_elem(Op::MinElem, a, b, |x, y| if x <= y { x } else { y })
    }

    fn map_elem(&mut self, op: Op, a: NodeId, f: impl Fn(f32) -> f32) -> NodeId {
        let av = &self.nodes[a.0].value;
        let v = Tensor::from_vec(av.rows, av.cols, av.data.iter().map(|&x| f(x)).collect());
        self.push(op, vec![a.0], v, None)
    }

    pub fn scale(&mut self, a: NodeId, s: f32) -> NodeId {
        self.map_elem(Op::Scale(s), a, |x| x * s)
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f32) -> NodeId {
        self.map_elem(Op::AddScalar, a, |x| x + s)
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        self.map_elem(Op::Elu, a, |x| if x > 0.0 { x } else { x.exp() - 1.0 })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map_elem(Op::Sigmoid, a, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.map_elem(Op::Exp, a, |x| x.exp())
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.map_elem(Op::Square, a, |x| x * x)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f32, hi: f32) -> NodeId {
        self.map_elem(Op::Clamp { lo, hi }, a, |x| x.clamp(lo, hi))
    }

    /// Elementwise Huber value: `0.5 x^2` inside `|x| <= delta`, linear outside.
    pub fn huber_elem(&mut self, a: NodeId, delta: f32) -> NodeId {
        self.map_elem(Op::HuberElem { delta }, a, move |x| {
            if x.abs() <= delta {
                0.5 * x * x
            } else {
                delta * (x.abs() - 0.5 * delta)
            }
        })
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f32 = self.nodes[a.0].value.data.iter().sum();
        self.push(Op::SumAll, vec![a.0], Tensor::scalar(s), None)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let s: f32 = av.data.iter().sum::<f32>() / av.len() as f32;
        self.push(Op::MeanAll, vec![a.0], Tensor::scalar(s), None)
    }

    /// Row sums: `[m, n] -> [m, 1]`.
    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let data = (0..av.rows).map(|r| av.row(r).iter().sum()).collect();
        let v = Tensor::from_vec(av.rows, 1, data);
        self.push(Op::RowSum, vec![a.0], v, None)
    }

    /// Mean over each window of consecutive rows: `[w*l, n] -> [w, n]`.
    pub fn window_mean_rows(&mut self, a: NodeId, windows: usize) -> NodeId {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.rows % windows, 0);
        let l = av.rows / windows;
        let mut v = Tensor::zeros(windows, av.cols);
        for w in 0..windows {
            for i in 0..l {
                let row = av.row(w * l + i);
                let out = v.row_mut(w);
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            }
            for o in v.row_mut(w) {
                *o /= l as f32;
            }
        }
        self.push(Op::WindowMeanRows { windows }, vec![a.0], v, None)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.transpose();
        self.push(Op::Transpose, vec![a.0], v, None)
    }

    pub fn row_log_softmax(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let mut v = av.clone();
        for r in 0..v.rows {
            let row = v.row_mut(r);
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f32>().ln();
            for x in row {
                *x -= lse;
            }
        }
        self.push(Op::RowLogSoftmax, vec![a.0], v, None)
    }

    /// Mean of the main diagonal of a square matrix.
    pub fn diag_mean(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.rows, av.cols, "diag_mean expects a square matrix");
        let s: f32 = (0..av.rows).map(|i| av.at(i, i)).sum::<f32>() / av.rows as f32;
        self.push(Op::DiagMean, vec![a.0], Tensor::scalar(s), None)
    }

    /// L2-normalize every row (with a small epsilon under the sqrt).
    pub fn row_l2_normalize(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let mut v = av.clone();
        for r in 0..v.rows {
            let row = v.row_mut(r);
            let n = (row.iter().map(|&x| x * x).sum::<f32>() + NORM_EPS).sqrt();
            for x in row {
                *x /= n;
            }
        }
        self.push(Op::RowL2Normalize, vec![a.0], v, None)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = &self.nodes[a.0].value;
        assert!(start + len <= av.rows);
        let data = av.data[start * av.cols..(start + len) * av.cols].to_vec();
        let v = Tensor::from_vec(len, av.cols, data);
        self.push(Op::SliceRows { start }, vec![a.0], v, None)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.nodes[parts[0].0].value.cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.cols, cols);
            rows += pv.rows;
            data.extend_from_slice(&pv.data);
        }
        let v = Tensor::from_vec(rows, cols, data);
        self.push(Op::ConcatRows, parts.iter().map(|p| p.0).collect(), v, None)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.rows, bv.rows);
        let mut v = Tensor::zeros(av.rows, av.cols + bv.cols);
        for r in 0..av.rows {
            v.row_mut(r)[..av.cols].copy_from_slice(av.row(r));
            v.row_mut(r)[av.cols..].copy_from_slice(bv.row(r));
        }
        self.push(Op::ConcatCols, vec![a.0, b.0], v, None)
    }

    /// Repeat each row `times` times consecutively: `[b, n] -> [b*times, n]`.
    pub fn repeat_rows(&mut self, a: NodeId, times: usize) -> NodeId {
        let av = &self.nodes[a.0].value;
        let mut v = Tensor::zeros(av.rows * times, av.cols);
        for r in 0..av.rows {
            for t in 0..times {
                v.row_mut(r * times + t).copy_from_slice(av.row(r));
            }
        }
        self.push(Op::RepeatRows { times }, vec![a.0], v, None)
    }

    /// Bag-of-indices embedding sum: row `b` of the output is the sum of
    /// the embedding rows listed in `indices[b]`.
    pub fn embed_sum(&mut self, table: NodeId, indices: Vec<Vec<usize>>) -> NodeId {
        let tv = &self.nodes[table.0].value;
        let mut v = Tensor::zeros(indices.len(), tv.cols);
        for (b, idx) in indices.iter().enumerate() {
            for &i in idx {
                assert!(i < tv.rows, "embedding index out of range");
                let src = tv.row(i);
                let dst = v.row_mut(b);
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += x;
                }
            }
        }
        self.push(Op::EmbedSum { indices }, vec![table.0], v, None)
    }

    /// Block-causal multi-head attention. See [`AttentionSpec`].
    pub fn block_attention(&mut self, q: NodeId, k: NodeId, v: NodeId, spec: AttentionSpec) -> NodeId {
        let (out, probs) = attention_kernel(
            &self.nodes[q.0].value,
            &self.nodes[k.0].value,
            &self.nodes[v.0].value,
            &spec,
        );
        self.push(
            Op::BlockAttention(spec),
            vec![q.0, k.0, v.0],
            out,
            Some(probs),
        )
    }

    /// Reverse pass from a scalar output. Returns gradients keyed by
    /// parameter index; parameters that do not affect the output get zero
    /// gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NetError> {
        let lv = &self.nodes[loss.0].value;
        if lv.shape() != (1, 1) {
            return Err(NetError::NonScalarLoss { rows: lv.rows, cols: lv.cols });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            if matches!(node.op, Op::Param(_)) {
                grads[idx] = Some(g);
            }
        }

        let mut out = Gradients::new(self.n_params);
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(pidx) = node.op {
                let g = grads[idx]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.rows, node.value.cols));
                out.by_param[pidx] = Some(g);
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], idx: usize, delta: Tensor) {
        if !self.nodes[idx].needs_grad {
            return;
        }
        match &mut grads[idx] {
            Some(g) => {
                debug_assert_eq!(g.shape(), delta.shape());
                for (o, d) in g.data.iter_mut().zip(&delta.data) {
                    *o += d;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let pv = |k: usize| &self.nodes[node.parents[k]].value;
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::Matmul { trans_b } => {
                let (a, b) = (pv(0), pv(1));
                if *trans_b {
                    self.accumulate(grads, node.parents[0], matmul(g, b, false));
                    self.accumulate(grads, node.parents[1], matmul_tn(g, a));
                } else {
                    self.accumulate(grads, node.parents[0], matmul(g, b, true));
                    self.accumulate(grads, node.parents[1], matmul_tn(a, g));
                }
            }
            Op::AddRowVec => {
                self.accumulate(grads, node.parents[0], g.clone());
                let mut db = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (o, &x) in db.data.iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                self.accumulate(grads, node.parents[1], db);
            }
            Op::MulRowVec => {
                let (x, b) = (pv(0), pv(1));
                let mut dx = g.clone();
                for r in 0..dx.rows {
                    for (o, &bb) in dx.row_mut(r).iter_mut().zip(&b.data) {
                        *o *= bb;
                    }
                }
                self.accumulate(grads, node.parents[0], dx);
                let mut db = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for c in 0..g.cols {
                        db.data[c] += g.at(r, c) * x.at(r, c);
                    }
                }
                self.accumulate(grads, node.parents[1], db);
            }
            Op::Add => {
                self.accumulate(grads, node.parents[0], g.clone());
                self.accumulate(grads, node.parents[1], g.clone());
            }
            Op::Sub => {
                self.accumulate(grads, node.parents[0], g.clone());
                let mut db = g.clone();
                for v in &mut db.data {
                    *v = -*v;
                }
                self.accumulate(grads, node.parents[1], db);
            }
            Op::MulElem => {
                let (a, b) = (pv(0), pv(1));
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&b.data).map(|(&gg, &bb)| gg * bb).collect(),
                );
                let db = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&a.data).map(|(&gg, &aa)| gg * aa).collect(),
                );
                self.accumulate(grads, node.parents[0], da);
                self.accumulate(grads, node.parents[1], db);
            }
            Op::MinElem => {
                let (a, b) = (pv(0), pv(1));
                let mut da = Tensor::zeros(g.rows, g.cols);
                let mut db = Tensor::zeros(g.rows, g.cols);
                for i in 0..g.len() {
                    if a.data[i] <= b.data[i] {
                        da.data[i] = g.data[i];
                    } else {
                        db.data[i] = g.data[i];
                    }
                }
                self.accumulate(grads, node.parents[0], da);
                self.accumulate(grads, node.parents[1], db);
            }
            Op::Scale(s) => {
                let da = Tensor::from_vec(g.rows, g.cols, g.data.iter().map(|&x| x * s).collect());
                self.accumulate(grads, node.parents[0], da);
            }
            Op::AddScalar => self.accumulate(grads, node.parents[0], g.clone()),
            Op::Elu => {
                let x = pv(0);
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data
                        .iter()
                        .zip(&x.data)
                        .map(|(&gg, &xx)| gg * if xx > 0.0 { 1.0 } else { xx.exp() })
                        .collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::Sigmoid => {
                let y = &node.value;
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&y.data).map(|(&gg, &yy)| gg * yy * (1.0 - yy)).collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::Exp => {
                let y = &node.value;
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&y.data).map(|(&gg, &yy)| gg * yy).collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::Square => {
                let x = pv(0);
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data.iter().zip(&x.data).map(|(&gg, &xx)| gg * 2.0 * xx).collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::Clamp { lo, hi } => {
                let x = pv(0);
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data
                        .iter()
                        .zip(&x.data)
                        .map(|(&gg, &xx)| if xx >= *lo && xx <= *hi { gg } else { 0.0 })
                        .collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::HuberElem { delta } => {
                let x = pv(0);
                let da = Tensor::from_vec(
                    g.rows,
                    g.cols,
                    g.data
                        .iter()
                        .zip(&x.data)
                        .map(|(&gg, &xx)| gg * xx.clamp(-delta, *delta))
                        .collect(),
                );
                self.accumulate(grads, node.parents[0], da);
            }
            Op::SumAll => {
                let x = pv(0);
                let s = g.data[0];
                self.accumulate(grads, node.parents[0], Tensor::from_vec(x.rows, x.cols, vec![s; x.len()]));
            }
            Op::MeanAll => {
                let x = pv(0);
                let s = g.data[0] / x.len() as f32;
                self.accumulate(grads, node.parents[0], Tensor::from_vec(x.rows, x.cols, vec![s; x.len()]));
            }
            Op::RowSum => {
                let x = pv(0);
                let mut da = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    let gg = g.data[r];
                    for v in da.row_mut(r) {
                        *v = gg;
                    }
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::WindowMeanRows { windows } => {
                let x = pv(0);
                let l = x.rows / windows;
                let mut da = Tensor::zeros(x.rows, x.cols);
                for w in 0..*windows {
                    for i in 0..l {
                        let dst = da.row_mut(w * l + i);
                        for (o, &gg) in dst.iter_mut().zip(g.row(w)) {
                            *o = gg / l as f32;
                        }
                    }
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::Transpose => self.accumulate(grads, node.parents[0], g.transpose()),
            Op::RowLogSoftmax => {
                let y = &node.value;
                let mut da = Tensor::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let gsum: f32 = g.row(r).iter().sum();
                    let (grow, yrow) = (g.row(r), y.row(r));
                    let drow = da.row_mut(r);
                    for c in 0..g.cols {
                        drow[c] = grow[c] - yrow[c].exp() * gsum;
                    }
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::DiagMean => {
                let x = pv(0);
                let mut da = Tensor::zeros(x.rows, x.cols);
                let s = g.data[0] / x.rows as f32;
                for i in 0..x.rows {
                    *da.at_mut(i, i) = s;
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::RowL2Normalize => {
                let x = pv(0);
                let y = &node.value;
                let mut da = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    let n = (x.row(r).iter().map(|&v| v * v).sum::<f32>() + NORM_EPS).sqrt();
                    let ydotg: f32 = y.row(r).iter().zip(g.row(r)).map(|(&a, &b)| a * b).sum();
                    let (grow, yrow) = (g.row(r), y.row(r));
                    let drow = da.row_mut(r);
                    for c in 0..x.cols {
                        drow[c] = (grow[c] - yrow[c] * ydotg) / n;
                    }
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::SliceRows { start } => {
                let x = pv(0);
                let mut da = Tensor::zeros(x.rows, x.cols);
                da.data[start * x.cols..start * x.cols + g.len()].copy_from_slice(&g.data);
                self.accumulate(grads, node.parents[0], da);
            }
            Op::ConcatRows => {
                let mut row = 0;
                for &p in node.parents.iter() {
                    let pvv = &self.nodes[p].value;
                    let slice = Tensor::from_vec(
                        pvv.rows,
                        pvv.cols,
                        g.data[row * g.cols..(row + pvv.rows) * g.cols].to_vec(),
                    );
                    self.accumulate(grads, p, slice);
                    row += pvv.rows;
                }
            }
            Op::ConcatCols => {
                let (a, b) = (pv(0), pv(1));
                let mut da = Tensor::zeros(a.rows, a.cols);
                let mut db = Tensor::zeros(b.rows, b.cols);
                for r in 0..g.rows {
                    da.row_mut(r).copy_from_slice(&g.row(r)[..a.cols]);
                    db.row_mut(r).copy_from_slice(&g.row(r)[a.cols..]);
                }
                self.accumulate(grads, node.parents[0], da);
                self.accumulate(grads, node.parents[1], db);
            }
            Op::RepeatRows { times } => {
                let x = pv(0);
                let mut da = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    for t in 0..*times {
                        let src = g.row(r * times + t);
                        for (o, &gg) in da.row_mut(r).iter_mut().zip(src) {
                            *o += gg;
                        }
                    }
                }
                self.accumulate(grads, node.parents[0], da);
            }
            Op::EmbedSum { indices } => {
                let table = pv(0);
                let mut dt = Tensor::zeros(table.rows, table.cols);
                for (b, idx) in indices.iter().enumerate() {
                    for &i in idx {
                        let src = g.row(b);
                        for (o, &gg) in dt.row_mut(i).iter_mut().zip(src) {
                            *o += gg;
                        }
                    }
                }
                self.accumulate(grads, node.parents[0], dt);
            }
            Op::BlockAttention(spec) => {
                let (q, k, v) = (pv(0), pv(1), pv(2));
                let probs = node.aux.as_ref().expect("attention aux");
                let d = q.cols;
                let dh = d / spec.heads;
                let scale = 1.0 / (dh as f32).sqrt();
                let mut dq = Tensor::zeros(q.rows, d);
                let mut dk = Tensor::zeros(k.rows, d);
                let mut dv = Tensor::zeros(v.rows, d);
                for w in 0..spec.windows {
                    for h in 0..spec.heads {
                        let hc = h * dh;
                        for i in 0..spec.q_len {
                            let visible = (i + spec.offset + 1).min(spec.kv_len);
                            let go = &g.row(w * spec.q_len + i)[hc..hc + dh];
                            let prow = probs.row((w * spec.heads + h) * spec.q_len + i);
                            // dP_j = go . v_j ; rowdot = sum_j dP_j P_j
                            let mut dp = vec![0.0f32; visible];
                            let mut rowdot = 0.0f32;
                            for (j, dpj) in dp.iter_mut().enumerate() {
                                let vrow = &v.row(w * spec.kv_len + j)[hc..hc + dh];
                                let mut s = 0.0;
                                for p in 0..dh {
                                    s += go[p] * vrow[p];
                                }
                                *dpj = s;
                                rowdot += s * prow[j];
                            }
                            for (j, &dpj) in dp.iter().enumerate() {
                                let pj = prow[j];
                                let ds = pj * (dpj - rowdot) * scale;
                                // dV_j += P_j * go ; dQ_i += dS_j * k_j ; dK_j += dS_j * q_i
                                let kv_row = w * spec.kv_len + j;
                                let krow = &k.row(kv_row)[hc..hc + dh];
                                let qrow = &q.row(w * spec.q_len + i)[hc..hc + dh];
                                let dqr = &mut dq.row_mut(w * spec.q_len + i)[hc..hc + dh];
                                for p in 0..dh {
                                    dqr[p] += ds * krow[p];
                                }
                                let dkr = &mut dk.row_mut(kv_row)[hc..hc + dh];
                                for p in 0..dh {
                                    dkr[p] += ds * qrow[p];
                                }
                                let dvr = &mut dv.row_mut(kv_row)[hc..hc + dh];
                                for p in 0..dh {
                                    dvr[p] += pj * go[p];
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, node.parents[0], dq);
                self.accumulate(grads, node.parents[1], dk);
                self.accumulate(grads, node.parents[2], dv);
            }
        }
    }
}

const NORM_EPS: f32 = 1e-12;

/// Attention forward shared by the tape op and the tapeless inference
/// path. Returns the output and the softmax probabilities
/// (`[windows*heads*q_len, kv_len]`, zero outside the causal region).
pub fn attention_kernel(qv: &Tensor, kv: &Tensor, vv: &Tensor, spec: &AttentionSpec) -> (Tensor, Tensor) {
    let d = qv.cols;
    assert_eq!(kv.cols, d);
    assert_eq!(vv.cols, d);
    assert_eq!(qv.rows, spec.windows * spec.q_len);
    assert_eq!(kv.rows, spec.windows * spec.kv_len);
    assert_eq!(d % spec.heads, 0, "embedding dim must divide head count");
    let dh = d / spec.heads;
    let scale = 1.0 / (dh as f32).sqrt();

    let mut out = Tensor::zeros(qv.rows, d);
    let mut probs = Tensor::zeros(spec.windows * spec.heads * spec.q_len, spec.kv_len);
    for w in 0..spec.windows {
        for h in 0..spec.heads {
            for i in 0..spec.q_len {
                let qrow = &qv.row(w * spec.q_len + i)[h * dh..(h + 1) * dh];
                let visible = (i + spec.offset + 1).min(spec.kv_len);
                let prow = probs.row_mut((w * spec.heads + h) * spec.q_len + i);
                let mut max = f32::NEG_INFINITY;
                for j in 0..visible {
                    let krow = &kv.row(w * spec.kv_len + j)[h * dh..(h + 1) * dh];
                    let mut s = 0.0;
                    for p in 0..dh {
                        s += qrow[p] * krow[p];
                    }
                    let s = s * scale;
                    prow[j] = s;
                    if s > max {
                        max = s;
                    }
                }
                let mut denom = 0.0;
                for p in prow.iter_mut().take(visible) {
                    *p = (*p - max).exp();
                    denom += *p;
                }
                for p in prow.iter_mut().take(visible) {
                    *p /= denom;
                }
                let orow = &mut out.row_mut(w * spec.q_len + i)[h * dh..(h + 1) * dh];
                for j in 0..visible {
                    let pj = probs.at((w * spec.heads + h) * spec.q_len + i, j);
                    let vrow = &vv.row(w * spec.kv_len + j)[h * dh..(h + 1) * dh];
                    for p in 0..dh {
                        orow[p] += pj * vrow[p];
                    }
                }
            }
        }
    }
    (out, probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        // f(x) = sum(x^2), x = [1, 2] -> grad [2, 4]
        let mut tape = Tape::new(1);
        let x = tape.param(0, &Tensor::row_vec(vec![1.0, 2.0]));
        let sq = tape.square(x);
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.by_param[0].as_ref().unwrap().data, vec![2.0, 4.0]);
    }

    #[test]
    fn unreferenced_param_gets_zero_gradient() {
        let mut tape = Tape::new(2);
        let x = tape.param(0, &Tensor::row_vec(vec![3.0]));
        let _unused = tape.param(1, &Tensor::row_vec(vec![5.0, 5.0]));
        let loss = tape.sum_all(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.by_param[1].as_ref().unwrap().data, vec![0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new(0);
        let x = tape.input(Tensor::row_vec(vec![1.0, 2.0]));
        assert!(matches!(
            tape.backward(x),
            Err(NetError::NonScalarLoss { rows: 1, cols: 2 })
        ));
    }

    #[test]
    fn constant_in_param_gradient_is_zero() {
        // loss does not depend on the param beyond a multiplication by zero
        let mut tape = Tape::new(1);
        let x = tape.param(0, &Tensor::row_vec(vec![4.0]));
        let zero = tape.input(Tensor::row_vec(vec![0.0]));
        let prod = tape.mul_elem(x, zero);
        let loss = tape.sum_all(prod);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.by_param[0].as_ref().unwrap().data, vec![0.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new(0);
        let x = tape.input(Tensor::from_vec(3, 4, (0..12).map(|i| i as f32 * 0.3 - 1.0).collect()));
        let ls = tape.row_log_softmax(x);
        for r in 0..3 {
            let s: f32 = tape.value(ls).row(r).iter().map(|&v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn param_node_reuse_accumulates() {
        // loss = sum(x) + sum(x^2) built with two uses of the same param node
        let mut tape = Tape::new(1);
        let x = tape.param(0, &Tensor::row_vec(vec![3.0]));
        let x2 = tape.param(0, &Tensor::row_vec(vec![3.0]));
        assert_eq!(x, x2);
        let sq = tape.square(x2);
        let s1 = tape.sum_all(x);
        let s2 = tape.sum_all(sq);
        let loss = tape.add(s1, s2);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.by_param[0].as_ref().unwrap().data, vec![1.0 + 6.0]);
    }
}
