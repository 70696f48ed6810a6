//! The Bakry–Émery Laplacian `L_μ = D_μ − A_μ`.
//!
//! A nonnegative node potential `μ` reweights every edge `(i, j)` by
//! `½(μ_i + μ_j)`. The sparsity pattern of the graph is kept; at `μ ≡ 1`
//! the operator is the combinatorial Laplacian. Weights are stored per
//! canonical edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_len, Graph};
use crate::operator::{weighted_degrees, Operator};
use crate::spectral::{eig_sym, lambda_max_power};

/// Floor applied to learned potentials.
pub const DEFAULT_MU_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential(Vec<f64>);

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (node, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativePotential { node, value });
            }
        }
        if values.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroPotential);
        }
        Ok(Self(values))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `‖μ‖₁`.
    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `μ̃ = μ / ‖μ‖₁`.
    pub fn normalized(&self) -> Vec<f64> {
        let mass = self.mass();
        self.0.iter().map(|v| v / mass).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

/// Entrywise `max(μ_i, floor)`.
pub fn floor_potential(mu: &[f64], floor: f64) -> Result<Potential> {
    Potential::new(mu.iter().map(|&v| if v.is_nan() { v } else { v.max(floor) }).collect())
}

/// Per-edge weights `½(μ_i + μ_j)` in canonical edge order.
pub fn edge_weights(g: &Graph, mu: &[f64]) -> Vec<f64> {
    g.edges().iter().map(|&(i, j)| 0.5 * (mu[i] + mu[j])).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `D_μ^{-1/2} L_μ D_μ^{-1/2}`
    Symmetric,
    /// `D_μ^{-1} L_μ` (not symmetric; same spectrum as the symmetric form)
    RandomWalk,
}

#[derive(Clone, Debug)]
pub struct BeOperator<'g> {
    graph: &'g Graph,
    mu: Potential,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

/// The two parts of `L_μ f`: `diffusion_i = μ_i (L f)_i` and
/// `advection_i = ½ Σ_{j∼i} (μ_j − μ_i)(f_j − f_i)`.
/// With the PSD operator, `L_μ f = diffusion − advection`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvectionDiffusion {
    pub diffusion: Vec<f64>,
    pub advection: Vec<f64>,
}

impl AdvectionDiffusion {
    pub fn combined(&self) -> Vec<f64> {
        self.diffusion.iter().zip(&self.advection).map(|(d, a)| d - a).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeatScheme {
    /// `U exp(−tΛ) Uᵀ f0`
    Spectral,
    /// Explicit Euler, first order.
    Euler { dt: f64 },
    /// Classical fourth-order Runge–Kutta.
    Rk4 { dt: f64 },
}

impl<'g> BeOperator<'g> {
    pub fn new(graph: &'g Graph, mu: Potential) -> Result<Self> {
        check_len(graph.n(), mu.len())?;
        let weights = edge_weights(graph, mu.values());
        let degrees = weighted_degrees(graph, &weights);
        Ok(Self { graph, mu, weights, degrees })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn potential(&self) -> &Potential {
        &self.mu
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal of `D_μ`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn adjacency(&self) -> Operator {
        Operator::weighted_adjacency(self.graph, &self.weights)
    }

    pub fn degree_matrix(&self) -> Operator {
        Operator::diagonal(&self.degrees)
    }

    pub fn laplacian(&self) -> Operator {
        Operator::weighted_laplacian(self.graph, &self.weights)
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.graph.n(), f.len())?;
        Ok(self.laplacian().matvec(f))
    }

    /// `½ Σ_i μ_i Σ_{j∼i} (f_i − f_j)(g_i − g_j)`, which equals `fᵀ L_μ g`.
    pub fn dirichlet_sum(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        check_len(self.graph.n(), f.len())?;
        check_len(self.graph.n(), g.len())?;
        let mu = self.mu.values();
        let mut total = 0.0;
        for i in 0..self.graph.n() {
            let inner: f64 = self.graph.neighbors(i).iter().map(|&j| (f[i] - f[j]) * (g[i] - g[j])).sum();
            total += mu[i] * inner;
        }
        Ok(0.5 * total)
    }

    pub fn advection_decomposition(&self, f: &[f64]) -> Result<AdvectionDiffusion> {
        check_len(self.graph.n(), f.len())?;
        let mu = self.mu.values();
        let lf = self.graph.laplacian().matvec(f);
        let diffusion = (0..f.len()).map(|i| mu[i] * lf[i]).collect();
        let advection = (0..f.len())
            .map(|i| 0.5 * self.graph.neighbors(i).iter().map(|&j| (mu[j] - mu[i]) * (f[j] - f[i])).sum::<f64>())
            .collect();
        Ok(AdvectionDiffusion { diffusion, advection })
    }

    pub fn normalized(&self, kind: Normalization) -> Result<Operator> {
        if let Some(i) = self.degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::IsolatedNodeUnderMu(i));
        }
        Ok(match kind {
            Normalization::Symmetric => {
                let s: Vec<f64> = self.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
                Operator::scaled_laplacian(self.graph, &self.weights, &s)
            }
            Normalization::RandomWalk => {
                let s: Vec<f64> = self.degrees.iter().map(|d| 1.0 / d).collect();
                Operator::left_scaled_laplacian(self.graph, &self.weights, &s)
            }
        })
    }

    /// Evolves `∂f/∂t = −L_μ f` from `f0` for time `t`.
    pub fn heat_flow(&self, f0: &[f64], t: f64, scheme: HeatScheme) -> Result<Vec<f64>> {
        check_len(self.graph.n(), f0.len())?;
        if !(t >= 0.0) {
            return Err(Error::BadSize(format!("time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(f0.to_vec());
        }
        let op = self.laplacian();
        match scheme {
            HeatScheme::Spectral => {
                let dec = eig_sym(&op)?;
                let coeffs = dec.project(f0);
                let decayed: Vec<f64> =
                    coeffs.iter().zip(&dec.eigenvalues).map(|(c, &l)| c * (-t * l).exp()).collect();
                Ok(dec.synthesize(&decayed))
            }
            HeatScheme::Euler { dt } | HeatScheme::Rk4 { dt } => {
                let lmax = lambda_max_power(&op, 10_000, 1e-10)?.value;
                let limit = match scheme {
                    HeatScheme::Euler { .. } => 2.0 / lmax,
                    // real-axis extent of the RK4 stability region
                    _ => 2.785 / lmax,
                };
                if !(dt > 0.0) || dt >= limit {
                    return Err(Error::UnstableStep { dt, limit });
                }
                let steps = (t / dt).ceil() as usize;
                let h = t / steps as f64;
                let mut f = f0.to_vec();
                let rhs = |x: &[f64]| -> Vec<f64> { op.matvec(x).into_iter().map(|v| -v).collect() };
                for _ in 0..steps {
                    if matches!(scheme, HeatScheme::Euler { .. }) {
                        let k = rhs(&f);
                        for (fi, ki) in f.iter_mut().zip(k) {
                            *fi += h * ki;
                        }
                    } else {
                        let k1 = rhs(&f);
                        let k2 = rhs(&axpy(&f, 0.5 * h, &k1));
                        let k3 = rhs(&axpy(&f, 0.5 * h, &k2));
                        let k4 = rhs(&axpy(&f, h, &k3));
                        for i in 0..f.len() {
                            f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                        }
                    }
                }
                Ok(f)
            }
        }
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::{ring, star};

    fn ring_mu() -> (Graph, Potential) {
        (ring(4), Potential::new(vec![1.0, 1.0, 3.0, 1.0]).unwrap())
    }

    #[test]
    fn rejects_bad_potentials() {
        assert!(matches!(Potential::new(vec![1.0, -0.1]), Err(Error::NegativePotential { node: 1, .. })));
        assert!(matches!(Potential::new(vec![0.0, 0.0]), Err(Error::ZeroPotential)));
        assert!(Potential::new(vec![f64::NAN]).is_err());
        let g = ring(4);
        assert!(matches!(
            BeOperator::new(&g, Potential::constant(3, 1.0).unwrap()),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn unit_potential_recovers_laplacian() {
        let g = ring(5);
        let be = BeOperator::new(&g, Potential::constant(5, 1.0).unwrap()).unwrap();
        assert_eq!(be.laplacian(), g.laplacian());
    }

    #[test]
    fn star_spoke_weights() {
        let g = star(6);
        let mu = Potential::new(vec![0.25, 0.0, 0.0, 0.25, 0.25, 0.25]).unwrap();
        let be = BeOperator::new(&g, mu).unwrap();
        assert_eq!(be.edge_weights(), &[0.125, 0.125, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn decomposition_reconstructs_column() {
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let parts = be.advection_decomposition(&e0).unwrap();
        let col = be.laplacian().to_dense().unwrap().col(0);
        for (c, r) in parts.combined().iter().zip(&col) {
            assert!((c - r).abs() < 1e-14);
        }
    }

    #[test]
    fn decomposition_trivial_cases() {
        let g = ring(4);
        let be = BeOperator::new(&g, Potential::constant(4, 2.0).unwrap()).unwrap();
        let parts = be.advection_decomposition(&[0.1, 0.5, -1.0, 2.0]).unwrap();
        assert!(parts.advection.iter().all(|&a| a == 0.0));
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        let parts = be.advection_decomposition(&[3.0; 4]).unwrap();
        assert!(parts.diffusion.iter().chain(&parts.advection).all(|&a| a == 0.0));
    }

    #[test]
    fn normalized_guard() {
        let g = star(4);
        let mu = Potential::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let be = BeOperator::new(&g, mu).unwrap();
        assert!(matches!(be.normalized(Normalization::Symmetric), Err(Error::IsolatedNodeUnderMu(1))));
    }

    #[test]
    fn random_walk_matches_symmetric_spectrum() {
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        let rw = be.normalized(Normalization::RandomWalk).unwrap();
        assert!(rw.asymmetry() > 0.0);
        assert!(rw.row_sums().iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn heat_flow_identity_at_zero_time() {
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        let f0 = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(be.heat_flow(&f0, 0.0, HeatScheme::Spectral).unwrap(), f0.to_vec());
    }

    #[test]
    fn heat_flow_rejects_unstable_step() {
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        assert!(matches!(
            be.heat_flow(&[1.0, 0.0, 0.0, 0.0], 1.0, HeatScheme::Euler { dt: 0.5 }),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn heat_flow_converges_to_mean() {
        let (g, mu) = ring_mu();
        let be = BeOperator::new(&g, mu).unwrap();
        let f = be.heat_flow(&[4.0, 0.0, 0.0, 0.0], 50.0, HeatScheme::Spectral).unwrap();
        for v in f {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
