//! Reverse-mode differentiation over a tape of 2-D tensors.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape in reverse and accumulates gradients into every node that
//! depends on a trainable leaf. Non-finite forward values are reported as
//! errors at the op that produced them.

use super::tensor::{gemm, Tensor};
use crate::error::NnError;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Square(Var),
    SoftmaxRows(Var),
    SumAll(Var),
    MeanAll(Var),
    SumCols(Var),
    Min(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    BlockScores(Var, Var, usize),
    BlockMix(Var, Var, usize),
    BlockMean(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn shape(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn checked(t: Tensor, op: &'static str) -> Result<Tensor, NnError> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(NnError::NonFinite(op))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn add_into(acc: &mut Option<Tensor>, t: Tensor) {
    match acc {
        Some(a) => {
            for (x, y) in a.data_mut().iter_mut().zip(t.data()) {
                *x += y;
            }
        }
        None => *acc = Some(t),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn unary(&mut self, x: Var, op: Op, name: &'static str, f: impl Fn(f64) -> f64) -> Result<Var, NnError> {
        let out = checked(self.value(x).map(f), name)?;
        let rg = self.rg(x);
        Ok(self.push(out, op, rg))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<(), NnError> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa == sb {
            Ok(())
        } else {
            Err(NnError::Shape { op, lhs: sa, rhs: sb })
        }
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var, NnError> {
        self.same_shape(a, b, name)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = checked(Tensor::from_vec(ta.rows(), ta.cols(), data)?, name)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = checked(self.value(a).matmul(self.value(b))?, "matmul")?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, Op::Min(a, b), "min", f64::min)
    }

    /// Adds a `1 x C` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NnError> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(NnError::Shape { op: "add_row", lhs: shape(tx), rhs: shape(tr) });
        }
        let mut out = tx.clone();
        let c = tx.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tr.data()[i % c];
        }
        let out = checked(out, "add_row")?;
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(out, Op::AddRow(x, row), rg))
    }

    /// Multiplies `x` by the value of a `1 x 1` node.
    pub fn mul_scalar_var(&mut self, x: Var, s: Var) -> Result<Var, NnError> {
        let ts = self.value(s);
        if shape(ts) != (1, 1) {
            return Err(NnError::Shape { op: "mul_scalar_var", lhs: shape(self.value(x)), rhs: shape(ts) });
        }
        let k = ts.item();
        let out = checked(self.value(x).map(|v| v * k), "mul_scalar_var")?;
        let rg = self.rg(x) || self.rg(s);
        Ok(self.push(out, Op::MulScalarVar(x, s), rg))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var, NnError> {
        self.unary(x, Op::Scale(x, k), "scale", |v| v * k)
    }

    pub fn add_scalar(&mut self, x: Var, k: f64) -> Result<Var, NnError> {
        self.unary(x, Op::AddScalar(x), "add_scalar", |v| v + k)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Tanh(x), "tanh", f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Relu(x), "relu", |v| v.max(0.0))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Exp(x), "exp", f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Log(x), "log", f64::ln)
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Softplus(x), "softplus", softplus)
    }

    pub fn square(&mut self, x: Var) -> Result<Var, NnError> {
        self.unary(x, Op::Square(x), "square", |v| v * v)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let tx = self.value(x);
        let mut out = tx.clone();
        let c = tx.cols();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    s += *v;
                }
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        }
        let out = checked(out, "softmax_rows")?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SoftmaxRows(x), rg))
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var, NnError> {
        let s = self.value(x).data().iter().sum();
        let out = checked(Tensor::scalar(s), "sum_all")?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SumAll(x), rg))
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var, NnError> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(NnError::Shape { op: "mean_all", lhs: shape(t), rhs: (1, 1) });
        }
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let out = checked(Tensor::scalar(s), "mean_all")?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::MeanAll(x), rg))
    }

    /// Row sums as an `R x 1` column.
    pub fn sum_cols(&mut self, x: Var) -> Result<Var, NnError> {
        let t = self.value(x);
        let c = t.cols().max(1);
        let data: Vec<f64> =
            if t.cols() == 0 { vec![0.0; t.rows()] } else { t.data().chunks(c).map(|r| r.iter().sum()).collect() };
        let out = checked(Tensor::from_vec(t.rows(), 1, data)?, "sum_cols")?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SumCols(x), rg))
    }

    /// Side-by-side concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(NnError::Shape { op: "concat_cols", lhs: (rows, cols), rhs: shape(t) });
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            for r in 0..rows {
                for c in 0..t.cols() {
                    out.set(r, off + c, t.get(r, c));
                }
            }
            off += t.cols();
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Columns `start..end` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if start > end || end > t.cols() {
            return Err(NnError::Shape { op: "slice_cols", lhs: shape(t), rhs: (start, end) });
        }
        let mut out = Tensor::zeros(t.rows(), end - start);
        for r in 0..t.rows() {
            for c in start..end {
                out.set(r, c - start, t.get(r, c));
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::Slice(x, start), rg))
    }

    /// Per-block score matrix.
    ///
    /// `q` and `k` stack `B` blocks of `n` rows. Row `(b, i)` of the result
    /// holds the dot products of `q[b, i]` with every `k[b, j]`, giving a
    /// `(B n) x n` tensor.
    pub fn block_scores(&mut self, q: Var, k: Var, n: usize) -> Result<Var, NnError> {
        self.same_shape(q, k, "block_scores")?;
        let (tq, tk) = (self.value(q), self.value(k));
        if n == 0 || tq.rows() % n != 0 {
            return Err(NnError::Shape { op: "block_scores", lhs: shape(tq), rhs: (n, n) });
        }
        let mut out = Tensor::zeros(tq.rows(), n);
        for b in 0..tq.rows() / n {
            for i in 0..n {
                let qi = tq.row(b * n + i);
                for j in 0..n {
                    let kj = tk.row(b * n + j);
                    out.set(b * n + i, j, qi.iter().zip(kj).map(|(x, y)| x * y).sum());
                }
            }
        }
        let out = checked(out, "block_scores")?;
        let rg = self.rg(q) || self.rg(k);
        Ok(self.push(out, Op::BlockScores(q, k, n), rg))
    }

    /// Per-block mixing: row `(b, i)` is `sum_j w[(b, i), j] * v[b, j]`.
    pub fn block_mix(&mut self, w: Var, v: Var, n: usize) -> Result<Var, NnError> {
        let (tw, tv) = (self.value(w), self.value(v));
        if n == 0 || tw.cols() != n || tw.rows() != tv.rows() || tv.rows() % n != 0 {
            return Err(NnError::Shape { op: "block_mix", lhs: shape(tw), rhs: shape(tv) });
        }
        let m = tv.cols();
        let mut out = Tensor::zeros(tv.rows(), m);
        for b in 0..tv.rows() / n {
            for i in 0..n {
                let r = b * n + i;
                for j in 0..n {
                    let a = tw.get(r, j);
                    let vj = tv.row(b * n + j);
                    for c in 0..m {
                        let cur = out.get(r, c);
                        out.set(r, c, cur + a * vj[c]);
                    }
                }
            }
        }
        let out = checked(out, "block_mix")?;
        let rg = self.rg(w) || self.rg(v);
        Ok(self.push(out, Op::BlockMix(w, v, n), rg))
    }

    /// Mean over each block of `n` consecutive rows: `(B n) x C -> B x C`.
    pub fn block_mean(&mut self, x: Var, n: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if n == 0 || t.rows() % n != 0 {
            return Err(NnError::Shape { op: "block_mean", lhs: shape(t), rhs: (n, 1) });
        }
        let blocks = t.rows() / n;
        let mut out = Tensor::zeros(blocks, t.cols());
        for r in 0..t.rows() {
            for c in 0..t.cols() {
                let cur = out.get(r / n, c);
                out.set(r / n, c, cur + t.get(r, c) / n as f64);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::BlockMean(x, n), rg))
    }

    /// Reverse pass from a `1 x 1` node.
    pub fn backward(&mut self, loss: Var) -> Result<(), NnError> {
        let t = self.value(loss);
        if shape(t) != (1, 1) {
            return Err(NnError::Shape { op: "backward", lhs: shape(t), rhs: (1, 1) });
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(dy) = self.grads[idx].take() else { continue };
            for (to, g) in self.propagate(idx, &dy) {
                if self.nodes[to.0].requires_grad {
                    add_into(&mut self.grads[to.0], g);
                }
            }
            self.grads[idx] = Some(dy);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, dy: &Tensor) -> Vec<(Var, Tensor)> {
        let mut out = Vec::with_capacity(2);
        let op = &self.nodes[idx].op;
        let y = &self.nodes[idx].value;
        let elementwise = |x: &Tensor, f: &dyn Fn(f64, f64, f64) -> f64| -> Tensor {
            let data = x.data().iter().zip(y.data()).zip(dy.data()).map(|((&x, &y), &d)| f(x, y, d)).collect();
            Tensor::from_vec(x.rows(), x.cols(), data).expect("shape preserved")
        };
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.rg(a) {
                    let mut ga = Tensor::zeros(m, k);
                    gemm(m, n, k, 1.0, dy.view(false), tb.view(true), 0.0, &mut ga);
                    out.push((a, ga));
                }
                if self.rg(b) {
                    let ta = &self.nodes[a.0].value;
                    let mut gb = Tensor::zeros(k, n);
                    gemm(k, m, n, 1.0, ta.view(true), dy.view(false), 0.0, &mut gb);
                    out.push((b, gb));
                }
            }
            Op::Add(a, b) => {
                out.push((a, dy.clone()));
                out.push((b, dy.clone()));
            }
            Op::Sub(a, b) => {
                out.push((a, dy.clone()));
                out.push((b, dy.map(|v| -v)));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let ga = elementwise(tb, &|bv, _, d| bv * d);
                let gb = elementwise(ta, &|av, _, d| av * d);
                out.push((a, ga));
                out.push((b, gb));
            }
            Op::Min(a, b) => {
                let ta = &self.nodes[a.0].value;
                let tb = &self.nodes[b.0].value;
                let pick_a: Vec<bool> = ta.data().iter().zip(tb.data()).map(|(x, y)| x <= y).collect();
                let ga = Tensor::from_vec(
                    dy.rows(),
                    dy.cols(),
                    dy.data().iter().zip(&pick_a).map(|(&d, &p)| if p { d } else { 0.0 }).collect(),
                )
                .expect("shape preserved");
                let gb = Tensor::from_vec(
                    dy.rows(),
                    dy.cols(),
                    dy.data().iter().zip(&pick_a).map(|(&d, &p)| if p { 0.0 } else { d }).collect(),
                )
                .expect("shape preserved");
                out.push((a, ga));
                out.push((b, gb));
            }
            Op::AddRow(x, row) => {
                if self.rg(row) {
                    let c = dy.cols();
                    let mut g = Tensor::zeros(1, c);
                    for (i, d) in dy.data().iter().enumerate() {
                        g.data_mut()[i % c] += d;
                    }
                    out.push((row, g));
                }
                out.push((x, dy.clone()));
            }
            Op::MulScalarVar(x, s) => {
                let k = self.nodes[s.0].value.item();
                if self.rg(s) {
                    let tx = &self.nodes[x.0].value;
                    let g: f64 = tx.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
                    out.push((s, Tensor::scalar(g)));
                }
                out.push((x, dy.map(|v| v * k)));
            }
            Op::Scale(x, k) => out.push((x, dy.map(|v| v * k))),
            Op::AddScalar(x) => out.push((x, dy.clone())),
            Op::Tanh(x) => {
                let g = elementwise(y, &|_, yv, d| d * (1.0 - yv * yv));
                out.push((x, g));
            }
            Op::Relu(x) => {
                let g = elementwise(y, &|_, yv, d| if yv > 0.0 { d } else { 0.0 });
                out.push((x, g));
            }
            Op::Exp(x) => {
                let g = elementwise(y, &|_, yv, d| d * yv);
                out.push((x, g));
            }
            Op::Log(x) => {
                let tx = &self.nodes[x.0].value;
                let g = elementwise(tx, &|xv, _, d| d / xv);
                out.push((x, g));
            }
            Op::Softplus(x) => {
                let tx = &self.nodes[x.0].value;
                let g = elementwise(tx, &|xv, _, d| d * sigmoid(xv));
                out.push((x, g));
            }
            Op::Square(x) => {
                let tx = &self.nodes[x.0].value;
                let g = elementwise(tx, &|xv, _, d| 2.0 * xv * d);
                out.push((x, g));
            }
            Op::SoftmaxRows(x) => {
                let c = y.cols();
                let mut g = Tensor::zeros(y.rows(), c);
                if c > 0 {
                    for ((gr, yr), dr) in g.data_mut().chunks_mut(c).zip(y.data().chunks(c)).zip(dy.data().chunks(c)) {
                        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            gr[j] = yr[j] * (dr[j] - dot);
                        }
                    }
                }
                out.push((x, g));
            }
            Op::SumAll(x) => {
                let tx = &self.nodes[x.0].value;
                let g = Tensor::filled(tx.rows(), tx.cols(), dy.item());
                out.push((x, g));
            }
            Op::MeanAll(x) => {
                let tx = &self.nodes[x.0].value;
                let g = Tensor::filled(tx.rows(), tx.cols(), dy.item() / tx.len() as f64);
                out.push((x, g));
            }
            Op::SumCols(x) => {
                let tx = &self.nodes[x.0].value;
                let mut g = Tensor::zeros(tx.rows(), tx.cols());
                for r in 0..tx.rows() {
                    for c in 0..tx.cols() {
                        g.set(r, c, dy.get(r, 0));
                    }
                }
                out.push((x, g));
            }
            Op::Concat(ref parts) => {
                let mut off = 0;
                for &p in parts {
                    let cols = self.nodes[p.0].value.cols();
                    if self.rg(p) {
                        let mut g = Tensor::zeros(dy.rows(), cols);
                        for r in 0..dy.rows() {
                            for c in 0..cols {
                                g.set(r, c, dy.get(r, off + c));
                            }
                        }
                        out.push((p, g));
                    }
                    off += cols;
                }
            }
            Op::Slice(x, start) => {
                let tx = &self.nodes[x.0].value;
                let mut g = Tensor::zeros(tx.rows(), tx.cols());
                for r in 0..dy.rows() {
                    for c in 0..dy.cols() {
                        g.set(r, start + c, dy.get(r, c));
                    }
                }
                out.push((x, g));
            }
            Op::BlockScores(q, k, n) => {
                let (tq, tk) = (&self.nodes[q.0].value, &self.nodes[k.0].value);
                let m = tq.cols();
                let mut gq = Tensor::zeros(tq.rows(), m);
                let mut gk = Tensor::zeros(tk.rows(), m);
                for b in 0..tq.rows() / n {
                    for i in 0..n {
                        for j in 0..n {
                            let d = dy.get(b * n + i, j);
                            if d == 0.0 {
                                continue;
                            }
                            for c in 0..m {
                                let gi = gq.get(b * n + i, c) + d * tk.get(b * n + j, c);
                                gq.set(b * n + i, c, gi);
                                let gj = gk.get(b * n + j, c) + d * tq.get(b * n + i, c);
                                gk.set(b * n + j, c, gj);
                            }
                        }
                    }
                }
                out.push((q, gq));
                out.push((k, gk));
            }
            Op::BlockMix(w, v, n) => {
                let (tw, tv) = (&self.nodes[w.0].value, &self.nodes[v.0].value);
                let m = tv.cols();
                let mut gw = Tensor::zeros(tw.rows(), n);
                let mut gv = Tensor::zeros(tv.rows(), m);
                for b in 0..tv.rows() / n {
                    for i in 0..n {
                        let r = b * n + i;
                        for j in 0..n {
                            let a = tw.get(r, j);
                            let mut acc = 0.0;
                            for c in 0..m {
                                let d = dy.get(r, c);
                                acc += d * tv.get(b * n + j, c);
                                let cur = gv.get(b * n + j, c);
                                gv.set(b * n + j, c, cur + a * d);
                            }
                            gw.set(r, j, acc);
                        }
                    }
                }
                out.push((w, gw));
                out.push((v, gv));
            }
            Op::BlockMean(x, n) => {
                let tx = &self.nodes[x.0].value;
                let mut g = Tensor::zeros(tx.rows(), tx.cols());
                for r in 0..tx.rows() {
                    for c in 0..tx.cols() {
                        g.set(r, c, dy.get(r / n, c) / n as f64);
                    }
                }
                out.push((x, g));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut g = Graph::new();
        let x = g.param(t(1, 2, &[1.0, 2.0]));
        let sq = g.square(x).unwrap();
        let s = g.sum_all(sq).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.constant(t(2, 3, &[1.0, 2.0, 3.0, -50.0, 0.0, 700.0]));
        let y = g.softmax_rows(x).unwrap();
        for r in 0..2 {
            assert_relative_eq!(g.value(y).row(r).iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let mut g = Graph::new();
        let a = g.constant(t(1, 2, &[1.0, 2.0]));
        let b = g.constant(t(1, 3, &[1.0, 2.0, 3.0]));
        assert!(matches!(g.add(a, b), Err(NnError::Shape { .. })));
        assert!(matches!(g.matmul(a, a), Err(NnError::Shape { .. })));
        let z = g.constant(t(1, 1, &[0.0]));
        assert!(matches!(g.log(z), Err(NnError::NonFinite("log"))));
        let s = g.sum_all(a).unwrap();
        assert!(g.backward(s).is_ok());
        assert!(matches!(g.backward(a), Err(NnError::Shape { .. })));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let w = g.param(t(2, 1, &[0.5, -1.0]));
        let x = g.constant(t(1, 2, &[3.0, 4.0]));
        let y = g.matmul(x, w).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(x).is_none());
        assert_eq!(g.grad(w).unwrap().data(), &[3.0, 4.0]);
    }

    /// Central-difference check of `f` at every entry of every input.
    fn fd_check(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Var) {
        let eval = |vals: &[Tensor]| {
            let mut g = Graph::new();
            let vars: Vec<Var> = vals.iter().map(|v| g.param(v.clone())).collect();
            let out = f(&mut g, &vars);
            g.value(out).item()
        };
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|v| g.param(v.clone())).collect();
        let out = f(&mut g, &vars);
        g.backward(out).unwrap();
        let h = 1e-6;
        for (k, input) in inputs.iter().enumerate() {
            let analytic = g.grad(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(input.rows(), input.cols()));
            for e in 0..input.len() {
                let mut plus = inputs.to_vec();
                plus[k].data_mut()[e] += h;
                let mut minus = inputs.to_vec();
                minus[k].data_mut()[e] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[e];
                assert!((a - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()), "input {k} entry {e}: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn elementwise_ops_gradients() {
        let a = t(2, 3, &[0.3, -0.7, 1.1, 0.2, -1.5, 0.9]);
        let b = t(2, 3, &[1.2, 0.4, -0.3, 0.8, 0.5, -0.6]);
        fd_check(&[a, b], |g, v| {
            let m = g.mul(v[0], v[1]).unwrap();
            let th = g.tanh(m).unwrap();
            let sp = g.softplus(v[1]).unwrap();
            let e = g.exp(th).unwrap();
            let s = g.sub(e, sp).unwrap();
            let sc = g.scale(s, 1.7).unwrap();
            let mn = g.min(sc, v[0]).unwrap();
            let sq = g.square(mn).unwrap();
            let lg = g.add_scalar(sp, 0.5).unwrap();
            let lg = g.log(lg).unwrap();
            let r = g.relu(v[0]).unwrap();
            let tot = g.add(sq, lg).unwrap();
            let tot = g.add(tot, r).unwrap();
            g.mean_all(tot).unwrap()
        });
    }

    #[test]
    fn structural_ops_gradients() {
        let a = t(3, 2, &[0.3, -0.7, 1.1, 0.2, -1.5, 0.9]);
        let w = t(2, 4, &[0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]);
        let row = t(1, 4, &[0.05, -0.1, 0.2, 0.0]);
        let s = t(1, 1, &[0.7]);
        fd_check(&[a, w, row, s], |g, v| {
            let h = g.matmul(v[0], v[1]).unwrap();
            let h = g.add_row(h, v[2]).unwrap();
            let sm = g.softmax_rows(h).unwrap();
            let left = g.slice_cols(sm, 0, 3).unwrap();
            let cat = g.concat_cols(&[left, v[0]]).unwrap();
            let cs = g.sum_cols(cat).unwrap();
            let cs = g.mul(cs, cs).unwrap();
            let sc = g.mul_scalar_var(cs, v[3]).unwrap();
            g.sum_all(sc).unwrap()
        });
    }

    #[test]
    fn block_ops_gradients() {
        let q = t(4, 3, &[0.3, -0.7, 1.1, 0.2, -1.5, 0.9, 0.4, 0.1, -0.2, 0.6, 0.6, -0.9]);
        let k = t(4, 3, &[1.2, 0.4, -0.3, 0.8, 0.5, -0.6, -0.1, 0.2, 0.3, 0.9, -0.4, 0.5]);
        fd_check(&[q, k], |g, v| {
            let s = g.block_scores(v[0], v[1], 2).unwrap();
            let a = g.softmax_rows(s).unwrap();
            let mix = g.block_mix(a, v[1], 2).unwrap();
            let pooled = g.block_mean(mix, 2).unwrap();
            let sq = g.square(pooled).unwrap();
            g.sum_all(sq).unwrap()
        });
    }

    #[test]
    fn block_ops_match_dense_per_block() {
        let q = t(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let mut g = Graph::new();
        let vq = g.constant(q.clone());
        let s = g.block_scores(vq, vq, 2).unwrap();
        // second block: rows [5,6], [7,8]
        assert_eq!(g.value(s).row(2), &[61.0, 83.0]);
        assert_eq!(g.value(s).row(1), &[11.0, 25.0]);
        let m = g.block_mean(vq, 2).unwrap();
        assert_eq!(g.value(m).data(), &[2.0, 3.0, 6.0, 7.0]);
    }
}
