//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node in creation order, which
//! is already a topological order, so `backward` walks the tape once from
//! the end.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tensor::{gemm, Tensor};
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Params {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.values.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Neighbour lists in compressed form; `offsets.len() == nodes + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Csr {
    pub fn nodes(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout(Var, Vec<f64>),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SegmentMax(Var, Vec<usize>),
    GinAggregate(Var, Csr),
    SelectRows(Var, Vec<usize>),
    Mse(Var, Var),
    WeightedMse(Var, Var, Vec<f64>),
    WeightedSum(Var, Vec<f64>),
    Sum(Var),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

/// Batch statistics produced by a training-mode batch norm, for updating
/// running averages outside the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance of the batch.
    pub var: Vec<f64>,
    pub count: usize,
}

pub struct Graph<'p> {
    params: &'p Params,
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NnError {
    NnError::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p Params) -> Graph<'p> {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match (&self.nodes[v.0].value, &self.nodes[v.0].op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("only parameters are stored by reference"),
        }
    }

    /// Constant input; receives no gradient outside the graph.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols != tb.rows {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = Tensor::zeros(ta.rows, tb.cols);
        gemm(ta.rows, ta.cols, tb.cols, &ta.data, false, &tb.data, false, &mut out.data, 0.0);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `x + b` with the `1 x cols` row `b` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let (tx, tb) = (self.value(x), self.value(b));
        if tb.rows != 1 || tb.cols != tx.cols {
            return Err(shape_err("add_bias", tx, tb));
        }
        let mut out = tx.clone();
        for row in out.data.chunks_mut(tx.cols.max(1)) {
            for (o, bias) in row.iter_mut().zip(&tb.data) {
                *o += bias;
            }
        }
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &'static str, f: fn(f64, f64) -> f64) -> Result<Tensor, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| f(*x, *y)).collect();
        Ok(Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data,
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.elementwise(a, b, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.elementwise(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.elementwise(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - p)`. Identity
    /// when not training or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Var {
        if !training || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mut out = t.clone();
        for (o, m) in out.data.iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(out, Op::Dropout(x, mask))
    }

    /// Training-mode batch normalisation over rows. Returns the output and
    /// the batch statistics for the caller's running averages.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats), NnError> {
        let t = self.value(x);
        let (n, c) = t.shape();
        if n < 2 {
            return Err(NnError::BatchTooSmall(n));
        }
        let (tg, tb) = (self.value(gamma), self.value(beta));
        if tg.shape() != (1, c) || tb.shape() != (1, c) {
            return Err(shape_err("batch_norm", t, tg));
        }
        let mut mean = vec![0.0; c];
        for row in t.data.chunks(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for row in t.data.chunks(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
        let mut xhat = vec![0.0; n * c];
        let mut out = Tensor::zeros(n, c);
        for i in 0..n {
            for j in 0..c {
                let h = (t.data[i * c + j] - mean[j]) * inv_std[j];
                xhat[i * c + j] = h;
                out.data[i * c + j] = tg.data[j] * h + tb.data[j];
            }
        }
        let var_out = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        );
        Ok((var_out, BatchStats { mean, var, count: n }))
    }

    /// Evaluation-mode batch normalisation with fixed statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<Var, NnError> {
        let t = self.value(x);
        let (n, c) = t.shape();
        let (tg, tb) = (self.value(gamma), self.value(beta));
        if tg.shape() != (1, c) || tb.shape() != (1, c) || running_mean.len() != c || running_var.len() != c {
            return Err(shape_err("batch_norm_eval", t, tg));
        }
        let inv_std: Vec<f64> = running_var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
        let mut xhat = vec![0.0; n * c];
        let mut out = Tensor::zeros(n, c);
        for i in 0..n {
            for j in 0..c {
                let h = (t.data[i * c + j] - running_mean[j]) * inv_std[j];
                xhat[i * c + j] = h;
                out.data[i * c + j] = tg.data[j] * h + tb.data[j];
            }
        }
        Ok(self.push(
            out,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Per-segment column maxima. Segment `g` covers rows
    /// `offsets[g]..offsets[g + 1]`; ties go to the lowest row.
    pub fn segment_max(&mut self, x: Var, offsets: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x);
        let c = t.cols;
        let segments = offsets.len().saturating_sub(1);
        if offsets.last().copied() != Some(t.rows) || offsets.first().copied() != Some(0) {
            return Err(NnError::Segments);
        }
        let mut out = Tensor::zeros(segments, c);
        let mut argmax = vec![0usize; segments * c];
        for g in 0..segments {
            let (start, end) = (offsets[g], offsets[g + 1]);
            if end <= start {
                return Err(NnError::Segments);
            }
            for j in 0..c {
                let mut best = start;
                for r in start + 1..end {
                    if t.data[r * c + j] > t.data[best * c + j] {
                        best = r;
                    }
                }
                argmax[g * c + j] = best;
                out.data[g * c + j] = t.data[best * c + j];
            }
        }
        Ok(self.push(out, Op::SegmentMax(x, argmax)))
    }

    /// `out_i = x_i + sum of x_n over neighbours n of i`.
    pub fn gin_aggregate(&mut self, x: Var, adjacency: &Csr) -> Result<Var, NnError> {
        let t = self.value(x);
        if adjacency.nodes() != t.rows {
            return Err(NnError::Segments);
        }
        let c = t.cols;
        let mut out = t.clone();
        for i in 0..t.rows {
            for &nb in adjacency.neighbors(i) {
                for j in 0..c {
                    out.data[i * c + j] += t.data[nb * c + j];
                }
            }
        }
        Ok(self.push(out, Op::GinAggregate(x, adjacency.clone())))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Var {
        let out = self.value(x).select_rows(rows);
        self.push(out, Op::SelectRows(x, rows.to_vec()))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.shape() != tt.shape() || tp.is_empty() {
            return Err(shape_err("mse", tp, tt));
        }
        let s: f64 = tp.data.iter().zip(&tt.data).map(|(p, t)| (p - t) * (p - t)).sum();
        let v = s / tp.len() as f64;
        Ok(self.push(Tensor::scalar(v), Op::Mse(pred, target)))
    }

    /// `sum_i w_i (p_i - t_i)^2 / n`. With unit weights this equals
    /// [`Graph::mse`] bit for bit.
    pub fn weighted_mse(&mut self, pred: Var, target: Var, weights: Vec<f64>) -> Result<Var, NnError> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.shape() != tt.shape() || tp.is_empty() {
            return Err(shape_err("weighted_mse", tp, tt));
        }
        if weights.len() != tp.len() {
            return Err(NnError::Shape {
                op: "weighted_mse",
                left: tp.shape(),
                right: (weights.len(), 1),
            });
        }
        let s: f64 = tp
            .data
            .iter()
            .zip(&tt.data)
            .zip(&weights)
            .map(|((p, t), w)| w * ((p - t) * (p - t)))
            .sum();
        let v = s / tp.len() as f64;
        Ok(self.push(Tensor::scalar(v), Op::WeightedMse(pred, target, weights)))
    }

    /// `sum_i w_i x_i` over all entries of `x`.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<f64>) -> Result<Var, NnError> {
        let t = self.value(x);
        if weights.len() != t.len() {
            return Err(NnError::Shape {
                op: "weighted_sum",
                left: t.shape(),
                right: (weights.len(), 1),
            });
        }
        let v: f64 = t.data.iter().zip(&weights).map(|(a, w)| a * w).sum();
        Ok(self.push(Tensor::scalar(v), Op::WeightedSum(x, weights)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v: f64 = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(v), Op::Sum(x))
    }

    /// Gradients of the scalar `loss` with respect to every parameter,
    /// indexed by [`ParamId`]; unused parameters get zeros.
    pub fn backward(&self, loss: Var) -> Result<Vec<Tensor>, NnError> {
        let mut param_grads = self.params.zeros_like();
        let mut input_grads = Vec::new();
        self.backward_inner(loss, &mut param_grads, &mut input_grads, &[])?;
        Ok(param_grads)
    }

    /// As [`Graph::backward`], also returning gradients for the given
    /// input nodes (used by gradient checks on inputs).
    pub fn backward_with_inputs(&self, loss: Var, inputs: &[Var]) -> Result<(Vec<Tensor>, Vec<Tensor>), NnError> {
        let mut param_grads = self.params.zeros_like();
        let mut input_grads = Vec::new();
        self.backward_inner(loss, &mut param_grads, &mut input_grads, inputs)?;
        Ok((param_grads, input_grads))
    }

    fn backward_inner(
        &self,
        loss: Var,
        param_grads: &mut [Tensor],
        input_grads: &mut Vec<Tensor>,
        inputs: &[Var],
    ) -> Result<(), NnError> {
        if loss.0 >= self.nodes.len() {
            return Err(NnError::NoTape);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(NnError::NotScalar(self.value(loss).shape()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {
                    grads[idx] = Some(g);
                }
                Op::Param(id) => param_grads[id.0].add_assign(&g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                    let mut ga = Tensor::zeros(m, k);
                    gemm(m, n, k, &g.data, false, &tb.data, true, &mut ga.data, 0.0);
                    let mut gb = Tensor::zeros(k, n);
                    gemm(k, m, n, &ta.data, true, &g.data, false, &mut gb.data, 0.0);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddBias(x, b) => {
                    let mut gb = Tensor::zeros(1, g.cols);
                    for row in g.data.chunks(g.cols.max(1)) {
                        for (s, v) in gb.data.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let mut neg = g.clone();
                    neg.data.iter_mut().for_each(|v| *v = -*v);
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let mut ga = g.clone();
                    for (v, y) in ga.data.iter_mut().zip(&tb.data) {
                        *v *= y;
                    }
                    let mut gb = g;
                    for (v, x) in gb.data.iter_mut().zip(&ta.data) {
                        *v *= x;
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(x, s) => {
                    let mut gx = g;
                    gx.data.iter_mut().for_each(|v| *v *= s);
                    acc(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let tx = self.value(*x);
                    let mut gx = g;
                    for (v, inp) in gx.data.iter_mut().zip(&tx.data) {
                        if *inp <= 0.0 {
                            *v = 0.0;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Dropout(x, mask) => {
                    let mut gx = g;
                    for (v, m) in gx.data.iter_mut().zip(mask) {
                        *v *= m;
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (n, c) = g.shape();
                    let tg = self.value(*gamma);
                    let mut dgamma = Tensor::zeros(1, c);
                    let mut dbeta = Tensor::zeros(1, c);
                    let mut sum_dxhat = vec![0.0; c];
                    let mut sum_dxhat_xhat = vec![0.0; c];
                    for i in 0..n {
                        for j in 0..c {
                            let dy = g.data[i * c + j];
                            let h = xhat[i * c + j];
                            dgamma.data[j] += dy * h;
                            dbeta.data[j] += dy;
                            let dh = dy * tg.data[j];
                            sum_dxhat[j] += dh;
                            sum_dxhat_xhat[j] += dh * h;
                        }
                    }
                    let mut gx = Tensor::zeros(n, c);
                    let nf = n as f64;
                    for i in 0..n {
                        for j in 0..c {
                            let dh = g.data[i * c + j] * tg.data[j];
                            gx.data[i * c + j] =
                                inv_std[j] / nf * (nf * dh - sum_dxhat[j] - xhat[i * c + j] * sum_dxhat_xhat[j]);
                        }
                    }
                    acc(&mut grads, *gamma, dgamma);
                    acc(&mut grads, *beta, dbeta);
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNormEval {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (n, c) = g.shape();
                    let tg = self.value(*gamma);
                    let mut dgamma = Tensor::zeros(1, c);
                    let mut dbeta = Tensor::zeros(1, c);
                    let mut gx = Tensor::zeros(n, c);
                    for i in 0..n {
                        for j in 0..c {
                            let dy = g.data[i * c + j];
                            dgamma.data[j] += dy * xhat[i * c + j];
                            dbeta.data[j] += dy;
                            gx.data[i * c + j] = dy * tg.data[j] * inv_std[j];
                        }
                    }
                    acc(&mut grads, *gamma, dgamma);
                    acc(&mut grads, *beta, dbeta);
                    acc(&mut grads, *x, gx);
                }
                Op::SegmentMax(x, argmax) => {
                    let tx = self.value(*x);
                    let c = tx.cols;
                    let mut gx = Tensor::zeros(tx.rows, c);
                    for (slot, &row) in argmax.iter().enumerate() {
                        let j = slot % c;
                        gx.data[row * c + j] += g.data[slot];
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::GinAggregate(x, adjacency) => {
                    let c = g.cols;
                    let mut gx = g.clone();
                    for i in 0..g.rows {
                        for &nb in adjacency.neighbors(i) {
                            for j in 0..c {
                                gx.data[nb * c + j] += g.data[i * c + j];
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SelectRows(x, rows) => {
                    let tx = self.value(*x);
                    let c = tx.cols;
                    let mut gx = Tensor::zeros(tx.rows, c);
                    for (k, &r) in rows.iter().enumerate() {
                        for j in 0..c {
                            gx.data[r * c + j] += g.data[k * c + j];
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Mse(pred, target) => {
                    let (tp, tt) = (self.value(*pred), self.value(*target));
                    let scale = 2.0 * g.item() / tp.len() as f64;
                    let data: Vec<f64> = tp.data.iter().zip(&tt.data).map(|(p, t)| scale * (p - t)).collect();
                    let gp = Tensor {
                        rows: tp.rows,
                        cols: tp.cols,
                        data: data.clone(),
                    };
                    let gt = Tensor {
                        rows: tp.rows,
                        cols: tp.cols,
                        data: data.into_iter().map(|v| -v).collect(),
                    };
                    acc(&mut grads, *pred, gp);
                    acc(&mut grads, *target, gt);
                }
                Op::WeightedMse(pred, target, weights) => {
                    let (tp, tt) = (self.value(*pred), self.value(*target));
                    let scale = 2.0 * g.item() / tp.len() as f64;
                    let data: Vec<f64> = tp
                        .data
                        .iter()
                        .zip(&tt.data)
                        .zip(weights)
                        .map(|((p, t), w)| scale * (w * (p - t)))
                        .collect();
                    let gt = Tensor {
                        rows: tp.rows,
                        cols: tp.cols,
                        data: data.iter().map(|v| -v).collect(),
                    };
                    let gp = Tensor {
                        rows: tp.rows,
                        cols: tp.cols,
                        data,
                    };
                    acc(&mut grads, *pred, gp);
                    acc(&mut grads, *target, gt);
                }
                Op::WeightedSum(x, weights) => {
                    let tx = self.value(*x);
                    let s = g.item();
                    let gx = Tensor {
                        rows: tx.rows,
                        cols: tx.cols,
                        data: weights.iter().map(|w| w * s).collect(),
                    };
                    acc(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let tx = self.value(*x);
                    acc(&mut grads, *x, Tensor::filled(tx.rows, tx.cols, g.item()));
                }
            }
        }
        for &v in inputs {
            let t = self.value(v);
            input_grads.push(
                grads
                    .get_mut(v.0)
                    .and_then(|g| g.take())
                    .unwrap_or_else(|| Tensor::zeros(t.rows, t.cols)),
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_segment_max() {
        let params = Params::new();
        let mut g = Graph::new(&params);
        let x = g.input(Tensor::from_vec(1, 3, alloc::vec![-1.0, 0.0, 2.0]).unwrap());
        let y = g.relu(x);
        assert_eq!(g.value(y).data, [0.0, 0.0, 2.0]);
        let nodes = g.input(Tensor::from_vec(2, 2, alloc::vec![1.0, 5.0, 3.0, 2.0]).unwrap());
        let m = g.segment_max(nodes, &[0, 2]).unwrap();
        assert_eq!(g.value(m).data, [3.0, 5.0]);
    }

    #[test]
    fn mse_gradient_at_three() {
        let mut params = Params::new();
        let p = params.add("x", Tensor::from_vec(2, 1, alloc::vec![3.0, 0.0]).unwrap());
        let mut g = Graph::new(&params);
        let x = g.param(p);
        let zero = g.input(Tensor::zeros(2, 1));
        let loss = g.mse(x, zero).unwrap();
        let grads = g.backward(loss).unwrap();
        // d/dx mean(x^2) = 2x / n
        assert_eq!(grads[0].data, [3.0, 0.0]);
    }

    #[test]
    fn batch_norm_of_identical_rows_gives_beta() {
        let mut params = Params::new();
        let gamma = params.add("g", Tensor::filled(1, 2, 2.0));
        let beta = params.add("b", Tensor::from_vec(1, 2, alloc::vec![0.5, -1.0]).unwrap());
        let mut g = Graph::new(&params);
        let x = g.input(Tensor::from_vec(3, 2, alloc::vec![4.0, 1.0, 4.0, 1.0, 4.0, 1.0]).unwrap());
        let (gv, bv) = (g.param(gamma), g.param(beta));
        let (y, stats) = g.batch_norm_train(x, gv, bv, 1e-5).unwrap();
        assert_eq!(g.value(y).data, [0.5, -1.0, 0.5, -1.0, 0.5, -1.0]);
        assert_eq!(stats.mean, [4.0, 1.0]);
        let one = g.input(Tensor::zeros(1, 2));
        assert_eq!(g.batch_norm_train(one, gv, bv, 1e-5).unwrap_err(), NnError::BatchTooSmall(1));
    }

    #[test]
    fn shape_errors_and_non_scalar_loss() {
        let params = Params::new();
        let mut g = Graph::new(&params);
        let a = g.input(Tensor::zeros(2, 3));
        let b = g.input(Tensor::zeros(2, 3));
        assert!(matches!(g.matmul(a, b), Err(NnError::Shape { .. })));
        assert_eq!(g.backward(a).unwrap_err(), NnError::NotScalar((2, 3)));
    }
}
