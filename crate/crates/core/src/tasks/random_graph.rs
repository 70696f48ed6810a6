use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RandomGraph {
    ErdosRenyi { p: f64 },
    BarabasiAlbert { m: usize },
}

impl Default for RandomGraph {
    fn default() -> Self {
        RandomGraph::ErdosRenyi { p: 0.2 }
    }
}

impl RandomGraph {
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Graph> {
        match *self {
            RandomGraph::ErdosRenyi { p } => erdos_renyi(n, p, rng),
            RandomGraph::BarabasiAlbert { m } => barabasi_albert(n, m, rng),
        }
    }
}

/// `G(n, p)`: every pair independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadSize(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, &edges)
}

/// Preferential attachment from a complete seed graph on `m + 1` nodes;
/// each later node links to `m` distinct earlier nodes chosen with
/// probability proportional to degree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Result<Graph> {
    if m == 0 || n < m + 1 {
        return Err(Error::BadSize(format!("Barabási–Albert needs m ≥ 1 and n ≥ m + 1, got n={n}, m={m}")));
    }
    let mut edges = Vec::new();
    // Each edge endpoint appears once here, so uniform draws are degree-proportional.
    let mut ends = Vec::new();
    for i in 0..=m {
        for j in i + 1..=m {
            edges.push((i, j));
            ends.extend([i, j]);
        }
    }
    for v in m + 1..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            ends.extend([t, v]);
        }
    }
    Graph::new(n, &edges)
}
