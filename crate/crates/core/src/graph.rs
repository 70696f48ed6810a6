//! Undirected graphs and their discrete calculus.
//!
//! Every stored edge `(i, j)` is oriented canonically with `i < j`, and
//! edge signals are indexed in that canonical (lexicographic) edge order.
//! The gradient is `(∇f)_e = f(j) − f(i)`, its adjoint extends edge values
//! antisymmetrically (`F(j, i) = −F(i, j)`), and the divergence is
//! `div = −2∇*`. With these conventions `∇*∇ = L` and `div ∇ = −2L`; the
//! two are exposed separately and never composed implicitly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::operator::Operator;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Canonical edge id for each adjacency slot, parallel to `neighbors`.
    slot_edge: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Duplicates (in either
    /// orientation) collapse to one edge.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut neighbors = vec![0usize; offsets[n]];
        let mut slot_edge = vec![0usize; offsets[n]];
        let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (e, &(a, b)) in edges.iter().enumerate() {
            rows[a].push((b, e));
            rows[b].push((a, e));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for (k, &(j, e)) in row.iter().enumerate() {
                neighbors[offsets[i] + k] = j;
                slot_edge[offsets[i] + k] = e;
            }
        }

        Ok(Self { n, edges, offsets, neighbors, slot_edge })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Canonically oriented edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Neighbors of `i` paired with the canonical id of the connecting edge.
    pub fn incident(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[range.clone()].iter().copied().zip(self.slot_edge[range].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.degree(i) as f64).collect()
    }

    /// Number of stored adjacency entries (twice the edge count).
    pub fn nnz(&self) -> usize {
        self.neighbors.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn degree_matrix(&self) -> Operator {
        Operator::diagonal(&self.degrees())
    }

    /// Combinatorial Laplacian `L = D − A`.
    pub fn laplacian(&self) -> Operator {
        Operator::weighted_laplacian(self, &vec![1.0; self.m()])
    }

    pub fn grad(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, f.len())?;
        Ok(self.edges.iter().map(|&(i, j)| f[j] - f[i]).collect())
    }

    /// Adjoint of [`Graph::grad`]: `(∇*F)(i) = ½ Σ_{j∼i} (F(j,i) − F(i,j))`.
    pub fn grad_adjoint(&self, edge_signal: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m(), edge_signal.len())?;
        let mut out = vec![0.0; self.n];
        for (&(i, j), &value) in self.edges.iter().zip(edge_signal) {
            out[i] -= value;
            out[j] += value;
        }
        Ok(out)
    }

    /// `div F = −2∇*F`.
    pub fn divergence(&self, edge_signal: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad_adjoint(edge_signal)?.into_iter().map(|v| -2.0 * v).collect())
    }

    /// `½ fᵀ L h`.
    pub fn dirichlet_form(&self, f: &[f64], h: &[f64]) -> Result<f64> {
        check_len(self.n, f.len())?;
        check_len(self.n, h.len())?;
        let lh = self.laplacian().matvec(h);
        Ok(0.5 * dot(f, &lh))
    }

    /// Connected-component label per node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.components().iter().all(|&c| c == 0)
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        check_len(self.n, perm.len())?;
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Graph::new(self.n, &edges)
    }

    /// Edge list text: one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes {}\n", self.n);
        for &(i, j) in &self.edges {
            s.push_str(&format!("{i} {j}\n"));
        }
        s
    }

    /// Parses the edge-list format. `# nodes N` comments (as written by
    /// [`Graph::to_edge_list`]) or an explicit `n` fix the node count,
    /// otherwise it is one more than the largest index seen.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Graph> {
        let mut edges = Vec::new();
        let mut declared = None;
        let mut max_index = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("nodes") {
                    declared = parts.next().and_then(|v| v.parse::<usize>().ok());
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: expected two indices", lineno + 1)))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let (a, b) = (next()?, next()?);
            max_index = Some(max_index.unwrap_or(0).max(a).max(b));
            edges.push((a, b));
        }
        let n = n.or(declared).unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
        Graph::new(n, &edges)
    }

    pub fn read_edge_list(path: &Path, n: Option<usize>) -> Result<Graph> {
        Graph::parse_edge_list(&std::fs::read_to_string(path)?, n)
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Common small graphs.
pub mod families {
    use super::Graph;

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges).expect("path edges are valid")
    }

    pub fn ring(n: usize) -> Graph {
        assert!(n >= 3, "ring needs at least 3 nodes");
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::new(n, &edges).expect("ring edges are valid")
    }

    /// Star with center 0 and leaves `1..n`.
    pub fn star(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Graph::new(n, &edges).expect("star edges are valid")
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph::new(n, &edges).expect("complete edges are valid")
    }
}
