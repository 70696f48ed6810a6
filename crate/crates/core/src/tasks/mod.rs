//! Synthetic benchmark generators. Every target is produced by an exact
//! oracle on the generated graph, and every generator is a pure function
//! of its parameters and seed.

mod oracle;
mod random_graph;

pub use oracle::{all_pairs_bfs, bfs_distances, diameter, eccentricities};
pub use random_graph::{barabasi_albert, erdos_renyi, RandomGraph};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::be::{BeOperator, Potential};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::models::{LossKind, ModelInput, Readout};
use crate::spectral::eig_sym;

pub const DEFAULT_RETRY_CAP: usize = 100;

/// One supervised problem. `y` has one row per node for node-level tasks
/// and a single row for graph-level tasks; `mask` selects supervised rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub graph: Arc<Graph>,
    pub x: Matrix,
    pub y: Matrix,
    pub mask: Vec<bool>,
    pub meta: InstanceMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub task: String,
    pub seed: u64,
    pub level: Readout,
    pub loss: LossKind,
    pub params: serde_json::Value,
    /// Per-node role labels such as `bell-a`, `bridge`, `clean`.
    pub roles: Vec<String>,
    /// Generator choices not fixed by the task definition.
    pub notes: Vec<String>,
}

impl TaskInstance {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn model_input(&self) -> Result<ModelInput> {
        ModelInput::new(Arc::clone(&self.graph), self.x.clone())
    }

    /// Indices of nodes carrying `role`.
    pub fn nodes_with_role(&self, role: &str) -> Vec<usize> {
        self.meta.roles.iter().enumerate().filter(|(_, r)| *r == role).map(|(i, _)| i).collect()
    }
}

/// Task family with its size parameters, as stored in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Barbell {
        /// Total node count `2·n_clique + k_path`.
        n: usize,
        #[serde(default = "default_k_path")]
        k_path: usize,
        /// Feature standard deviation; defaults to `√n_clique`.
        #[serde(default)]
        feature_std: Option<f64>,
    },
    GraphProperty {
        property: Property,
        #[serde(default = "default_n_min")]
        n_min: usize,
        #[serde(default = "default_n_max")]
        n_max: usize,
        #[serde(default)]
        generator: RandomGraph,
    },
    RingRouting {
        n: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
}

fn default_k_path() -> usize {
    4
}
fn default_n_min() -> usize {
    15
}
fn default_n_max() -> usize {
    25
}
fn default_classes() -> usize {
    10
}
fn default_noise() -> f64 {
    1.0
}

impl TaskSpec {
    pub fn generate(&self, seed: u64) -> Result<TaskInstance> {
        match *self {
            TaskSpec::Barbell { n, k_path, feature_std } => {
                let n_clique = barbell_split(n, k_path)?;
                gen_barbell_with(n_clique, k_path, feature_std, seed)
            }
            TaskSpec::GraphProperty { property, n_min, n_max, generator } => {
                gen_graph_property(property, n_min, n_max, generator, seed)
            }
            TaskSpec::RingRouting { n, classes, noise } => gen_ring_routing_with(n, classes, noise, seed),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TaskSpec::Barbell { .. } => "barbell".into(),
            TaskSpec::GraphProperty { property, .. } => property.name().into(),
            TaskSpec::RingRouting { .. } => "ring-routing".into(),
        }
    }

    pub fn loss(&self) -> LossKind {
        match self {
            TaskSpec::RingRouting { .. } => LossKind::CrossEntropy,
            _ => LossKind::Mse,
        }
    }

    pub fn readout(&self) -> Readout {
        match self {
            TaskSpec::GraphProperty { property: Property::Diameter, .. } => Readout::Graph,
            _ => Readout::Node,
        }
    }

    /// Feature and output widths.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            TaskSpec::Barbell { .. } => (1, 1),
            TaskSpec::GraphProperty { property: Property::Sssp, .. } => (3, 1),
            TaskSpec::GraphProperty { .. } => (2, 1),
            TaskSpec::RingRouting { classes, .. } => (*classes, *classes),
        }
    }
}

/// Clique size for a barbell with `total` nodes and `k_path` bridge nodes.
pub fn barbell_split(total: usize, k_path: usize) -> Result<usize> {
    if total < k_path + 4 || (total - k_path) % 2 != 0 {
        return Err(Error::BadSize(format!("barbell total {total} with bridge {k_path} does not split into two cliques of ≥ 2")));
    }
    Ok((total - k_path) / 2)
}

/// Bell A is `0..n`, the bridge `n..n+k`, bell B `n+k..2n+k`; the path runs
/// `n−1 → n → … → n+k−1 → n+k`.
pub fn barbell_graph(n_clique: usize, k_path: usize) -> Result<Graph> {
    if n_clique < 2 || k_path < 1 {
        return Err(Error::BadSize(format!("barbell needs n_clique ≥ 2 and k_path ≥ 1, got {n_clique}, {k_path}")));
    }
    let total = 2 * n_clique + k_path;
    let b0 = n_clique + k_path;
    let mut edges = Vec::new();
    for base in [0, b0] {
        for i in 0..n_clique {
            for j in i + 1..n_clique {
                edges.push((base + i, base + j));
            }
        }
    }
    for v in n_clique - 1..b0 {
        edges.push((v, v + 1));
    }
    Graph::new(total, &edges)
}

/// Each bell node's target is the mean feature of the opposite bell.
pub fn barbell_targets(n_clique: usize, k_path: usize, x: &[f64]) -> Result<Vec<f64>> {
    let total = 2 * n_clique + k_path;
    crate::graph::check_len(total, x.len())?;
    let b0 = n_clique + k_path;
    let mean_a = x[..n_clique].iter().sum::<f64>() / n_clique as f64;
    let mean_b = x[b0..].iter().sum::<f64>() / n_clique as f64;
    Ok((0..total).map(|i| if i < n_clique { mean_b } else if i >= b0 { mean_a } else { 0.0 }).collect())
}

fn barbell_roles(n_clique: usize, k_path: usize) -> Vec<String> {
    let b0 = n_clique + k_path;
    (0..2 * n_clique + k_path)
        .map(|i| if i < n_clique { "bell-a" } else if i < b0 { "bridge" } else { "bell-b" }.to_string())
        .collect()
}

/// Barbell instance with standard-normal features scaled by `√n_clique`.
pub fn gen_barbell(n_clique: usize, k_path: usize, seed: u64) -> Result<TaskInstance> {
    gen_barbell_with(n_clique, k_path, None, seed)
}

pub fn gen_barbell_with(n_clique: usize, k_path: usize, feature_std: Option<f64>, seed: u64) -> Result<TaskInstance> {
    let graph = barbell_graph(n_clique, k_path)?;
    let std = feature_std.unwrap_or((n_clique as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..graph.n()).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    barbell_instance(graph, n_clique, k_path, x, std, seed)
}

/// Barbell instance with caller-supplied scalar features.
pub fn barbell_with_features(n_clique: usize, k_path: usize, x: Vec<f64>) -> Result<TaskInstance> {
    let graph = barbell_graph(n_clique, k_path)?;
    barbell_instance(graph, n_clique, k_path, x, f64::NAN, 0)
}

fn barbell_instance(graph: Graph, n_clique: usize, k_path: usize, x: Vec<f64>, std: f64, seed: u64) -> Result<TaskInstance> {
    let y = barbell_targets(n_clique, k_path, &x)?;
    let roles = barbell_roles(n_clique, k_path);
    let mask = roles.iter().map(|r| r != "bridge").collect();
    let n = graph.n();
    Ok(TaskInstance {
        graph: Arc::new(graph),
        x: Matrix::from_vec(n, 1, x),
        y: Matrix::from_vec(n, 1, y),
        mask,
        meta: InstanceMeta {
            task: "barbell".into(),
            seed,
            level: Readout::Node,
            loss: LossKind::Mse,
            params: serde_json::json!({ "n_clique": n_clique, "k_path": k_path, "total": n, "feature_std": std }),
            roles,
            notes: vec![
                "features: i.i.d. normal with std sqrt(n_clique) so that targets have unit variance".into(),
                "supervision: bell nodes only; bridge nodes unsupervised".into(),
            ],
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Diameter,
    Sssp,
    Eccentricity,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Diameter => "diameter",
            Property::Sssp => "sssp",
            Property::Eccentricity => "eccentricity",
        }
    }
}

/// Labels for `property` on a fixed connected graph. Returns `(x, y)`.
pub fn graph_property_labels(g: &Graph, property: Property, source: usize) -> Result<(Matrix, Matrix)> {
    if !g.is_connected() {
        return Err(Error::BadSize("graph-property labels need a connected graph".into()));
    }
    let n = g.n();
    let deg = g.degrees();
    let width = if property == Property::Sssp { 3 } else { 2 };
    let mut x = Matrix::zeros(n, width);
    for i in 0..n {
        x.row_mut(i)[0] = 1.0;
        x.row_mut(i)[1] = deg[i];
    }
    let y = match property {
        Property::Diameter => Matrix::filled(1, 1, diameter(g) as f64),
        Property::Eccentricity => {
            Matrix::column(&eccentricities(g).into_iter().map(|e| e as f64).collect::<Vec<_>>())
        }
        Property::Sssp => {
            if source >= n {
                return Err(Error::IndexOutOfRange { index: source, n });
            }
            x.row_mut(source)[2] = 1.0;
            let d = bfs_distances(g, source);
            Matrix::column(&d.into_iter().map(|v| v.expect("connected") as f64).collect::<Vec<_>>())
        }
    };
    Ok((x, y))
}

pub fn gen_graph_property(property: Property, n_min: usize, n_max: usize, generator: RandomGraph, seed: u64) -> Result<TaskInstance> {
    if n_min < 2 || n_max < n_min {
        return Err(Error::BadSize(format!("node range [{n_min}, {n_max}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(n_min..=n_max);
    let mut graph = None;
    for _ in 0..DEFAULT_RETRY_CAP {
        let g = generator.sample(n, &mut rng)?;
        if g.is_connected() {
            graph = Some(g);
            break;
        }
    }
    let g = graph.ok_or(Error::DisconnectedAfterRetries(DEFAULT_RETRY_CAP))?;
    let source = rng.random_range(0..n);
    let (x, y) = graph_property_labels(&g, property, source)?;
    let level = if property == Property::Diameter { Readout::Graph } else { Readout::Node };
    let mask = vec![true; y.rows()];
    let roles = (0..n).map(|i| if property == Property::Sssp && i == source { "source" } else { "node" }.to_string()).collect();
    Ok(TaskInstance {
        graph: Arc::new(g),
        x,
        y,
        mask,
        meta: InstanceMeta {
            task: property.name().into(),
            seed,
            level,
            loss: LossKind::Mse,
            params: serde_json::json!({ "n": n, "generator": generator, "source": (property == Property::Sssp).then_some(source) }),
            roles,
            notes: vec!["features: constant 1, degree, and a source indicator for sssp".into()],
        },
    })
}

/// Ring routing with ten classes and unit noise.
pub fn gen_ring_routing(n: usize, seed: u64) -> Result<TaskInstance> {
    gen_ring_routing_with(n, 10, 1.0, seed)
}

/// Query node 0, answer node `n/2`. One of the two paths between them
/// (chosen by the seed) carries Gaussian noise of scale `noise`.
pub fn gen_ring_routing_with(n: usize, classes: usize, noise: f64, seed: u64) -> Result<TaskInstance> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::BadSize(format!("ring routing needs an even n ≥ 8, got {n}")));
    }
    if classes < 2 {
        return Err(Error::BadSize(format!("need at least two classes, got {classes}")));
    }
    let graph = crate::graph::families::ring(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = rng.random_range(0..classes);
    let noisy_first = rng.random_bool(0.5);
    let (q, a) = (0, n / 2);
    let mut x = Matrix::zeros(n, classes);
    x.row_mut(a)[class] = 1.0;
    let mut roles = vec![String::new(); n];
    roles[q] = "query".into();
    roles[a] = "answer".into();
    for v in 1..a {
        let noisy_side = if noisy_first { v } else { n - v };
        let clean_side = n - noisy_side;
        roles[noisy_side] = "noisy".into();
        roles[clean_side] = "clean".into();
    }
    for v in 1..n {
        if roles[v] == "noisy" {
            for c in 0..classes {
                let z: f64 = StandardNormal.sample(&mut rng);
                x.row_mut(v)[c] = noise * z;
            }
        }
    }
    let mut y = Matrix::zeros(n, classes);
    y.row_mut(q)[class] = 1.0;
    let mut mask = vec![false; n];
    mask[q] = true;
    Ok(TaskInstance {
        graph: Arc::new(graph),
        x,
        y,
        mask,
        meta: InstanceMeta {
            task: "ring-routing".into(),
            seed,
            level: Readout::Node,
            loss: LossKind::CrossEntropy,
            params: serde_json::json!({ "n": n, "classes": classes, "noise": noise, "class": class, "query": q, "answer": a }),
            roles,
            notes: vec!["the noisy path side is drawn per instance".into()],
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnosis {
    Ok,
    Oversquashing,
    Oversmoothing,
}

/// Heuristic bands around MSE ≈ 1 (oversquashing) and ≈ 30 (oversmoothing).
pub fn oracle_mse_interpretation(mse: f64) -> Diagnosis {
    if mse < 0.5 {
        Diagnosis::Ok
    } else if mse < 5.0 {
        Diagnosis::Oversquashing
    } else {
        Diagnosis::Oversmoothing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShowcaseReport {
    pub spectrum: Vec<f64>,
    pub spectrum_mu: Vec<f64>,
    pub expected: Vec<f64>,
    pub expected_mu: Vec<f64>,
    pub max_error: f64,
    /// Smallest gap between consecutive nonzero `L_μ` eigenvalues.
    pub min_gap_mu: f64,
}

/// The 4-ring with `μ = (1,1,3,1)`: a repeated eigenvalue of `L` splits.
pub fn four_ring_showcase() -> Result<ShowcaseReport> {
    let g = crate::graph::families::ring(4);
    let spectrum = eig_sym(&g.laplacian())?.eigenvalues;
    let be = BeOperator::new(&g, Potential::new(vec![1.0, 1.0, 3.0, 1.0])?)?;
    let spectrum_mu = eig_sym(&be.laplacian())?.eigenvalues;
    let r = 17f64.sqrt();
    let expected = vec![0.0, 2.0, 2.0, 4.0];
    let expected_mu = vec![0.0, (9.0 - r) / 2.0, 3.0, (9.0 + r) / 2.0];
    let max_error = spectrum
        .iter()
        .zip(&expected)
        .chain(spectrum_mu.iter().zip(&expected_mu))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let min_gap_mu = spectrum_mu[1..].windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(ShowcaseReport { spectrum, spectrum_mu, expected, expected_mu, max_error, min_gap_mu })
}

#[cfg(test)]
mod tests;
