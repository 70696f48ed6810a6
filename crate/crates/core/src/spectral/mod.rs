//! Spectral queries on graph operators and the Rayleigh-quotient
//! factorization relating `L` and `L_μ`.

mod eigen;
pub mod theory;

pub use eigen::{
    eig_sym, eig_sym_dense, lambda_max_power, PowerEstimate, SpectralDecomposition, POWER_FALLBACK_LIMIT,
};

use serde::Serialize;

use crate::be::{BeOperator, Potential};
use crate::error::{Error, Result};
use crate::graph::{check_len, Graph};
use crate::matrix::dot;
use crate::operator::Operator;

/// Per-node local variation of a signal.
///
/// `local_variation[u] = Σ_{v∼u} (f(u) − f(v))² / fᵀf`. Each edge is seen
/// from both endpoints, so the entries sum to `2 R(f)`. `distribution` is
/// the normalized profile `p_f`; it is `None` when the signal has no
/// variation at all (constant on every component).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationProfile {
    pub local_variation: Vec<f64>,
    pub distribution: Option<Vec<f64>>,
}

impl VariationProfile {
    pub fn is_degenerate(&self) -> bool {
        self.distribution.is_none()
    }

    /// `Σ_u w(u) p_f(u)`; `None` for a degenerate profile.
    pub fn expectation(&self, weights: &[f64]) -> Option<f64> {
        self.distribution.as_ref().map(|p| dot(p, weights))
    }
}

pub fn variation_profile(g: &Graph, f: &[f64]) -> Result<VariationProfile> {
    check_len(g.n(), f.len())?;
    let energy = dot(f, f);
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let local_variation: Vec<f64> = (0..g.n())
        .map(|u| g.neighbors(u).iter().map(|&v| (f[u] - f[v]).powi(2)).sum::<f64>() / energy)
        .collect();
    let total: f64 = local_variation.iter().sum();
    let distribution = (total > 0.0).then(|| local_variation.iter().map(|x| x / total).collect());
    Ok(VariationProfile { local_variation, distribution })
}

/// `fᵀ A f / fᵀ f`.
pub fn rayleigh(op: &Operator, f: &[f64]) -> Result<f64> {
    check_len(op.n(), f.len())?;
    let energy = dot(f, f);
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(dot(f, &op.matvec(f)) / energy)
}

/// Both sides of `R_μ(f) = ‖μ‖₁ · E_μ̃[p_f] · R(f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Factorization {
    /// `R_μ(f)` evaluated on the assembled `L_μ`.
    pub lhs: f64,
    /// `‖μ‖₁ · (μ̃ᵀ p_f) · R(f)` from the variation profile.
    pub rhs: f64,
    pub expectation: f64,
}

impl Factorization {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn rayleigh_factorization_check(g: &Graph, mu: &Potential, f: &[f64]) -> Result<Factorization> {
    let profile = variation_profile(g, f)?;
    let expectation = profile.expectation(&mu.normalized()).ok_or(Error::ZeroSignal)?;
    let be = BeOperator::new(g, mu.clone())?;
    let lhs = rayleigh(&be.laplacian(), f)?;
    let r = rayleigh(&g.laplacian(), f)?;
    Ok(Factorization { lhs, rhs: mu.mass() * expectation * r, expectation })
}
