//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive in evaluation order; backward walks
//! the records once in reverse. Besides the usual dense algebra it has
//! graph primitives that make `L_μ` differentiable in `μ`:
//! [`Tape::edge_weights`] (`w_e = ½(μ_i + μ_j)`), [`Tape::degree_scatter`]
//! and [`Tape::weighted_laplacian`].

mod adam;
pub mod check;

pub use adam::{Adam, AdamConfig};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::operator::Operator;

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    RowScale(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Relu(usize),
    Softplus(usize),
    Exp(usize),
    Tanh(usize),
    Powf(usize, f64),
    Sum(usize),
    MeanRows(usize),
    Transpose(usize),
    Concat(Vec<usize>),
    EdgeWeights(usize, Arc<Graph>),
    DegreeScatter(usize, Arc<Graph>),
    WeightedLaplacian { w: usize, x: usize, graph: Arc<Graph> },
    ConstOp(Arc<Operator>, usize),
    LogSoftmaxRows(usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::ShapeMismatch { op, detail: format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1) }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) | Op::RowScale(a, b) => {
                self.nodes[*a].needs_grad || self.nodes[*b].needs_grad
            }
            Op::WeightedLaplacian { w, x, .. } => self.nodes[*w].needs_grad || self.nodes[*x].needs_grad,
            Op::Concat(parts) => parts.iter().any(|&p| self.nodes[p].needs_grad),
            Op::Scale(a, _)
            | Op::Offset(a)
            | Op::Relu(a)
            | Op::Softplus(a)
            | Op::Exp(a)
            | Op::Tanh(a)
            | Op::Powf(a, _)
            | Op::Sum(a)
            | Op::MeanRows(a)
            | Op::Transpose(a)
            | Op::EdgeWeights(a, _)
            | Op::DegreeScatter(a, _)
            | Op::ConstOp(_, a)
            | Op::LogSoftmaxRows(a) => self.nodes[*a].needs_grad,
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        v.index
    }

    /// A differentiable input (parameter).
    pub fn param(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: true });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    /// A constant input; no gradient is propagated into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[self.idx(v)].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa.1 != sb.0 {
            return Err(mismatch("matmul", sa, sb));
        }
        let value = self.nodes[ia].value.matmul(&self.nodes[ib].value);
        Ok(self.push(value, Op::MatMul(ia, ib)))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &'static str) -> Result<(usize, usize)> {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa != sb {
            return Err(mismatch(name, sa, sb));
        }
        Ok((ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.elementwise(a, b, "add")?;
        let value = self.nodes[ia].value.add(&self.nodes[ib].value);
        Ok(self.push(value, Op::Add(ia, ib)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.elementwise(a, b, "sub")?;
        let value = self.nodes[ia].value.sub(&self.nodes[ib].value);
        Ok(self.push(value, Op::Sub(ia, ib)))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = self.elementwise(a, b, "mul")?;
        let value = self.nodes[ia].value.zip_map(&self.nodes[ib].value, |x, y| x * y);
        Ok(self.push(value, Op::Mul(ia, ib)))
    }

    /// `x + 1 bᵀ` for a `1 × c` row `b`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (ix, ib) = (self.idx(x), self.idx(b));
        let (sx, sb) = (self.nodes[ix].value.shape(), self.nodes[ib].value.shape());
        if sb != (1, sx.1) {
            return Err(mismatch("add_row", sx, sb));
        }
        let mut value = self.nodes[ix].value.clone();
        let row = self.nodes[ib].value.row(0).to_vec();
        for i in 0..sx.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(&row) {
                *v += b;
            }
        }
        Ok(self.push(value, Op::AddRow(ix, ib)))
    }

    /// `diag(s) x` for an `n × 1` column `s`.
    pub fn row_scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let (ix, is) = (self.idx(x), self.idx(s));
        let (sx, ss) = (self.nodes[ix].value.shape(), self.nodes[is].value.shape());
        if ss != (sx.0, 1) {
            return Err(mismatch("row_scale", sx, ss));
        }
        let mut value = self.nodes[ix].value.clone();
        for i in 0..sx.0 {
            let si = self.nodes[is].value[(i, 0)];
            value.row_mut(i).iter_mut().for_each(|v| *v *= si);
        }
        Ok(self.push(value, Op::RowScale(ix, is)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.scale(c);
        self.push(value, Op::Scale(ix, c))
    }

    /// `x + c` elementwise.
    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(|v| v + c);
        self.push(value, Op::Offset(ix))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(|v| v.max(0.0));
        self.push(value, Op::Relu(ix))
    }

    /// `ln(1 + eˣ)`, computed stably.
    pub fn softplus(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(softplus);
        self.push(value, Op::Softplus(ix))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(f64::exp);
        self.push(value, Op::Exp(ix))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(f64::tanh);
        self.push(value, Op::Tanh(ix))
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.map(|v| v.powf(p));
        self.push(value, Op::Powf(ix, p))
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = Matrix::from_vec(1, 1, vec![self.nodes[ix].value.sum()]);
        self.push(value, Op::Sum(ix))
    }

    /// Column means as a `1 × c` row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let m = &self.nodes[ix].value;
        let mut value = Matrix::zeros(1, m.cols());
        for i in 0..m.rows() {
            for (v, x) in value.row_mut(0).iter_mut().zip(m.row(i)) {
                *v += x;
            }
        }
        let rows = m.rows().max(1) as f64;
        let value = value.scale(1.0 / rows);
        self.push(value, Op::MeanRows(ix))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let value = self.nodes[ix].value.transpose();
        self.push(value, Op::Transpose(ix))
    }

    /// Horizontal concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let rows = self.nodes[idx[0]].value.rows();
        if let Some(&bad) = idx.iter().find(|&&i| self.nodes[i].value.rows() != rows) {
            return Err(mismatch("concat_cols", self.nodes[idx[0]].value.shape(), self.nodes[bad].value.shape()));
        }
        let mats: Vec<&Matrix> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let value = Matrix::hstack(&mats);
        Ok(self.push(value, Op::Concat(idx)))
    }

    /// Node potential `μ` (`n × 1`) to edge weights `½(μ_i + μ_j)` (`m × 1`).
    pub fn edge_weights(&mut self, mu: Var, graph: &Arc<Graph>) -> Result<Var> {
        let im = self.idx(mu);
        let s = self.nodes[im].value.shape();
        if s != (graph.n(), 1) {
            return Err(mismatch("edge_weights", s, (graph.n(), 1)));
        }
        let mu_v = self.nodes[im].value.as_slice();
        let w: Vec<f64> = graph.edges().iter().map(|&(i, j)| 0.5 * (mu_v[i] + mu_v[j])).collect();
        Ok(self.push(Matrix::column(&w), Op::EdgeWeights(im, Arc::clone(graph))))
    }

    /// Edge weights (`m × 1`) to weighted degrees (`n × 1`).
    pub fn degree_scatter(&mut self, w: Var, graph: &Arc<Graph>) -> Result<Var> {
        let iw = self.idx(w);
        let s = self.nodes[iw].value.shape();
        if s != (graph.m(), 1) {
            return Err(mismatch("degree_scatter", s, (graph.m(), 1)));
        }
        let deg = crate::operator::weighted_degrees(graph, self.nodes[iw].value.as_slice());
        Ok(self.push(Matrix::column(&deg), Op::DegreeScatter(iw, Arc::clone(graph))))
    }

    /// `(D_w − A_w) x` for edge weights `w` (`m × 1`) and signals `x` (`n × c`).
    pub fn weighted_laplacian(&mut self, w: Var, x: Var, graph: &Arc<Graph>) -> Result<Var> {
        let (iw, ix) = (self.idx(w), self.idx(x));
        let (sw, sx) = (self.nodes[iw].value.shape(), self.nodes[ix].value.shape());
        if sw != (graph.m(), 1) || sx.0 != graph.n() {
            return Err(mismatch("weighted_laplacian", sw, sx));
        }
        let value = laplacian_apply(graph, self.nodes[iw].value.as_slice(), &self.nodes[ix].value);
        Ok(self.push(value, Op::WeightedLaplacian { w: iw, x: ix, graph: Arc::clone(graph) }))
    }

    /// Applies a fixed symmetric operator.
    pub fn const_op(&mut self, op: &Arc<Operator>, x: Var) -> Result<Var> {
        let ix = self.idx(x);
        let sx = self.nodes[ix].value.shape();
        if sx.0 != op.n() {
            return Err(mismatch("const_op", (op.n(), op.n()), sx));
        }
        let value = op.apply(&self.nodes[ix].value);
        Ok(self.push(value, Op::ConstOp(Arc::clone(op), ix)))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let ix = self.idx(x);
        let m = &self.nodes[ix].value;
        let mut value = m.clone();
        for i in 0..m.rows() {
            let row = value.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(value, Op::LogSoftmaxRows(ix))
    }

    /// Gradients of the scalar `loss` with respect to every recorded node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.tape != self.id || loss.index >= self.nodes.len() {
            return Err(Error::DetachedLoss);
        }
        let (rows, cols) = self.nodes[loss.index].value.shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NotScalar { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(Matrix::filled(1, 1, 1.0));

        for i in (0..=loss.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { tape: self.id, grads })
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = |k: usize| &self.nodes[k].value;
        let mut send = |k: usize, contribution: Matrix| {
            if !self.nodes[k].needs_grad {
                return;
            }
            match &mut grads[k] {
                Some(acc) => acc.add_assign(&contribution),
                slot => *slot = Some(contribution),
            }
        };
        let wants = |k: usize| self.nodes[k].needs_grad;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    send(*a, g.matmul_t(val(*b)));
                }
                if wants(*b) {
                    send(*b, val(*a).t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    send(*a, g.zip_map(val(*b), |x, y| x * y));
                }
                if wants(*b) {
                    send(*b, g.zip_map(val(*a), |x, y| x * y));
                }
            }
            Op::AddRow(x, b) => {
                send(*x, g.clone());
                if wants(*b) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    send(*b, gb);
                }
            }
            Op::RowScale(x, s) => {
                let (xv, sv) = (val(*x), val(*s));
                if wants(*x) {
                    let mut gx = g.clone();
                    for r in 0..g.rows() {
                        let si = sv[(r, 0)];
                        gx.row_mut(r).iter_mut().for_each(|v| *v *= si);
                    }
                    send(*x, gx);
                }
                if wants(*s) {
                    let gs: Vec<f64> =
                        (0..g.rows()).map(|r| g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum()).collect();
                    send(*s, Matrix::column(&gs));
                }
            }
            Op::Scale(x, c) => send(*x, g.scale(*c)),
            Op::Offset(x) => send(*x, g.clone()),
            Op::Relu(x) => send(*x, g.zip_map(val(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 })),
            Op::Softplus(x) => send(*x, g.zip_map(val(*x), |gv, xv| gv * sigmoid(xv))),
            Op::Exp(_) | Op::Tanh(_) => {
                let out = &self.nodes[i].value;
                let (x, local): (usize, Matrix) = match &self.nodes[i].op {
                    Op::Exp(x) => (*x, g.zip_map(out, |gv, o| gv * o)),
                    Op::Tanh(x) => (*x, g.zip_map(out, |gv, o| gv * (1.0 - o * o))),
                    _ => unreachable!(),
                };
                send(x, local);
            }
            Op::Powf(x, p) => send(*x, g.zip_map(val(*x), |gv, xv| gv * p * xv.powf(p - 1.0))),
            Op::Sum(x) => {
                let (r, c) = val(*x).shape();
                send(*x, Matrix::filled(r, c, g[(0, 0)]));
            }
            Op::MeanRows(x) => {
                let (r, c) = val(*x).shape();
                let mut gx = Matrix::zeros(r, c);
                let inv = 1.0 / r.max(1) as f64;
                for row in 0..r {
                    for (dst, src) in gx.row_mut(row).iter_mut().zip(g.row(0)) {
                        *dst = src * inv;
                    }
                }
                send(*x, gx);
            }
            Op::Transpose(x) => send(*x, g.transpose()),
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let width = val(p).cols();
                    if wants(p) {
                        send(p, g.col_block(offset, width));
                    }
                    offset += width;
                }
            }
            Op::EdgeWeights(mu, graph) => {
                let mut gm = vec![0.0; graph.n()];
                for (&(a, b), &ge) in graph.edges().iter().zip(g.as_slice()) {
                    gm[a] += 0.5 * ge;
                    gm[b] += 0.5 * ge;
                }
                send(*mu, Matrix::column(&gm));
            }
            Op::DegreeScatter(w, graph) => {
                let gd = g.as_slice();
                let gw: Vec<f64> = graph.edges().iter().map(|&(a, b)| gd[a] + gd[b]).collect();
                send(*w, Matrix::column(&gw));
            }
            Op::WeightedLaplacian { w, x, graph } => {
                if wants(*x) {
                    send(*x, laplacian_apply(graph, val(*w).as_slice(), g));
                }
                if wants(*w) {
                    let xv = val(*x);
                    let gw: Vec<f64> = graph
                        .edges()
                        .iter()
                        .map(|&(a, b)| {
                            g.row(a)
                                .iter()
                                .zip(g.row(b))
                                .zip(xv.row(a).iter().zip(xv.row(b)))
                                .map(|((ga, gb), (xa, xb))| (ga - gb) * (xa - xb))
                                .sum()
                        })
                        .collect();
                    send(*w, Matrix::column(&gw));
                }
            }
            Op::ConstOp(op, x) => send(*x, op.apply(g)),
            Op::LogSoftmaxRows(x) => {
                let out = &self.nodes[i].value;
                let mut gx = g.clone();
                for r in 0..g.rows() {
                    let total: f64 = g.row(r).iter().sum();
                    for (dst, o) in gx.row_mut(r).iter_mut().zip(out.row(r)) {
                        *dst -= o.exp() * total;
                    }
                }
                send(*x, gx);
            }
        }
    }
}

fn laplacian_apply(graph: &Graph, w: &[f64], x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (&(a, b), &we) in graph.edges().iter().zip(w) {
        for c in 0..x.cols() {
            let d = we * (x[(a, c)] - x[(b, c)]);
            out[(a, c)] += d;
            out[(b, c)] -= d;
        }
    }
    out
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
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

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `v`; zero when the loss does not depend on it.
    pub fn wrt(&self, v: Var, shape: (usize, usize)) -> Matrix {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        self.grads[v.index].clone().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn get(&self, v: Var) -> Option<&Matrix> {
        assert_eq!(v.tape, self.tape, "variable belongs to a different tape");
        self.grads[v.index].as_ref()
    }
}
