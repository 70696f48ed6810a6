//! Linear operators on node signals.
//!
//! Graph operators (Laplacians, their normalized and rescaled forms) keep
//! the sparsity of the graph and are stored row-compressed; arbitrary
//! matrices are stored densely. Dense realization is limited to
//! [`DENSE_LIMIT`] nodes.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Dense(Matrix),
    Sparse(SparseOperator),
}

impl SparseOperator {
    /// Row `i` holds `diag[i]` at column `i` and `offdiag(i, j, e)` for every
    /// neighbor `j` reached through canonical edge `e`. Columns stay sorted.
    fn from_graph(g: &Graph, diag: &[f64], mut offdiag: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let n = g.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(g.nnz() + n);
        let mut values = Vec::with_capacity(g.nnz() + n);
        row_ptr.push(0);
        for i in 0..n {
            let mut placed_diag = false;
            for (j, e) in g.incident(i) {
                if !placed_diag && j > i {
                    col_idx.push(i);
                    values.push(diag[i]);
                    placed_diag = true;
                }
                col_idx.push(j);
                values.push(offdiag(i, j, e));
            }
            if !placed_diag {
                col_idx.push(i);
                values.push(diag[i]);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }
}

impl Operator {
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Operator::Sparse(SparseOperator {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// `D_w − A_w` for per-edge weights `w` in canonical edge order.
    pub fn weighted_laplacian(g: &Graph, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), g.m(), "one weight per edge");
        let deg = weighted_degrees(g, weights);
        Operator::Sparse(SparseOperator::from_graph(g, &deg, |_, _, e| -weights[e]))
    }

    /// `A_w` itself (zero diagonal).
    pub fn weighted_adjacency(g: &Graph, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), g.m(), "one weight per edge");
        Operator::Sparse(SparseOperator::from_graph(g, &vec![0.0; g.n()], |_, _, e| weights[e]))
    }

    /// `S (D_w − A_w) S` with `S = diag(scale)`.
    pub fn scaled_laplacian(g: &Graph, weights: &[f64], scale: &[f64]) -> Self {
        let deg = weighted_degrees(g, weights);
        let diag: Vec<f64> = (0..g.n()).map(|i| scale[i] * deg[i] * scale[i]).collect();
        Operator::Sparse(SparseOperator::from_graph(g, &diag, |i, j, e| -scale[i] * weights[e] * scale[j]))
    }

    /// `diag(left) (D_w − A_w)`; generally not symmetric.
    pub fn left_scaled_laplacian(g: &Graph, weights: &[f64], left: &[f64]) -> Self {
        let deg = weighted_degrees(g, weights);
        let diag: Vec<f64> = (0..g.n()).map(|i| left[i] * deg[i]).collect();
        Operator::Sparse(SparseOperator::from_graph(g, &diag, |i, _, e| -left[i] * weights[e]))
    }

    /// GCN propagation `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃ = D + I`.
    pub fn gcn_propagation(g: &Graph) -> Self {
        let s: Vec<f64> = (0..g.n()).map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt()).collect();
        let diag: Vec<f64> = s.iter().map(|v| v * v).collect();
        Operator::Sparse(SparseOperator::from_graph(g, &diag, |i, j, _| s[i] * s[j]))
    }

    pub fn from_dense(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::ShapeMismatch { op: "operator", detail: format!("{}x{} is not square", m.rows(), m.cols()) });
        }
        Ok(Operator::Dense(m))
    }

    pub fn n(&self) -> usize {
        match self {
            Operator::Dense(m) => m.rows(),
            Operator::Sparse(s) => s.n,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "operator matvec length");
        match self {
            Operator::Dense(m) => m.matvec(x),
            Operator::Sparse(s) => (0..s.n).map(|i| s.row(i).map(|(j, v)| v * x[j]).sum()).collect(),
        }
    }

    /// Applies the operator to every column of `x`.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n(), "operator apply rows");
        match self {
            Operator::Dense(m) => m.matmul(x),
            Operator::Sparse(s) => {
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for i in 0..s.n {
                    let out_row = out.row_mut(i);
                    for (j, v) in s.row(i) {
                        for (o, xv) in out_row.iter_mut().zip(x.row(j)) {
                            *o += v * xv;
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Result<Matrix> {
        let n = self.n();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
        }
        Ok(match self {
            Operator::Dense(m) => m.clone(),
            Operator::Sparse(s) => {
                let mut m = Matrix::zeros(n, n);
                for i in 0..n {
                    for (j, v) in s.row(i) {
                        m[(i, j)] += v;
                    }
                }
                m
            }
        })
    }

    /// `alpha · self + beta · I`, keeping the storage kind.
    pub fn affine(&self, alpha: f64, beta: f64) -> Operator {
        match self {
            Operator::Dense(m) => {
                let mut out = m.scale(alpha);
                for i in 0..m.rows() {
                    out[(i, i)] += beta;
                }
                Operator::Dense(out)
            }
            Operator::Sparse(s) => {
                let mut out = s.clone();
                for i in 0..s.n {
                    for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                        out.values[k] = alpha * s.values[k] + if s.col_idx[k] == i { beta } else { 0.0 };
                    }
                }
                Operator::Sparse(out)
            }
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        match self {
            Operator::Dense(m) => (0..m.rows()).map(|i| m[(i, i)]).collect(),
            Operator::Sparse(s) => {
                (0..s.n).map(|i| s.row(i).filter(|&(j, _)| j == i).map(|(_, v)| v).sum()).collect()
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Operator::Dense(m) => m.max_abs(),
            Operator::Sparse(s) => s.values.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match self {
            Operator::Dense(m) => (0..m.rows()).map(|i| m.row(i).iter().sum()).collect(),
            Operator::Sparse(s) => (0..s.n).map(|i| s.row(i).map(|(_, v)| v).sum()).collect(),
        }
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        match self {
            Operator::Dense(m) => m.asymmetry(),
            Operator::Sparse(s) => {
                let mut worst = 0.0f64;
                for i in 0..s.n {
                    for (j, v) in s.row(i) {
                        let back = s.row(j).find(|&(c, _)| c == i).map_or(0.0, |(_, w)| w);
                        worst = worst.max((v - back).abs());
                    }
                }
                worst
            }
        }
    }

    /// Nonzero off-diagonal pattern as sorted `(i, j)` pairs with `i < j`.
    pub fn offdiag_pattern(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        match self {
            Operator::Dense(m) => {
                for i in 0..m.rows() {
                    for j in (i + 1)..m.cols() {
                        if m[(i, j)] != 0.0 || m[(j, i)] != 0.0 {
                            out.push((i, j));
                        }
                    }
                }
            }
            Operator::Sparse(s) => {
                for i in 0..s.n {
                    for (j, v) in s.row(i) {
                        if j > i && v != 0.0 {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn weighted_degrees(g: &Graph, weights: &[f64]) -> Vec<f64> {
    let mut deg = vec![0.0; g.n()];
    for (&(i, j), &w) in g.edges().iter().zip(weights) {
        deg[i] += w;
        deg[j] += w;
    }
    deg
}
