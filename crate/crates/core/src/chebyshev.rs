//! Chebyshev polynomial filters `Y = Σ_k T_k(L̃) X Θ_k` on a rescaled
//! operator `L̃ = 2·op/λ_max − I`, evaluated with the three-term recurrence.

use crate::be::{BeOperator, Normalization};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::operator::Operator;
use crate::spectral::lambda_max_power;

/// Multiplier applied to estimated largest eigenvalues before rescaling.
pub const LAMBDA_MAX_SLACK: f64 = 1.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebFilter {
    lambda_max: f64,
    /// One `c_in × c_out` matrix per order `0..=K`.
    coefficients: Vec<Matrix>,
}

impl ChebFilter {
    pub fn new(lambda_max: f64, coefficients: Vec<Matrix>) -> Result<Self> {
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::NonPositiveLambdaMax(lambda_max));
        }
        let Some(first) = coefficients.first() else {
            return Err(Error::ShapeMismatch { op: "cheb filter", detail: "needs at least one coefficient".into() });
        };
        let shape = first.shape();
        if let Some(bad) = coefficients.iter().find(|c| c.shape() != shape) {
            return Err(Error::ShapeMismatch {
                op: "cheb filter",
                detail: format!("coefficient {:?} differs from {:?}", bad.shape(), shape),
            });
        }
        Ok(Self { lambda_max, coefficients })
    }

    /// Scalar coefficients act on every channel alike.
    pub fn scalar(lambda_max: f64, coefficients: &[f64], channels: usize) -> Result<Self> {
        let mats = coefficients.iter().map(|&c| Matrix::identity(channels).scale(c)).collect();
        Self::new(lambda_max, mats)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn coefficients(&self) -> &[Matrix] {
        &self.coefficients
    }

    pub fn in_channels(&self) -> usize {
        self.coefficients[0].rows()
    }

    pub fn out_channels(&self) -> usize {
        self.coefficients[0].cols()
    }
}

/// `2·op/λ_max − I`.
pub fn scale_operator(op: &Operator, lambda_max: f64) -> Result<Operator> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::NonPositiveLambdaMax(lambda_max));
    }
    Ok(op.affine(2.0 / lambda_max, -1.0))
}

/// Power-iteration estimate of `λ_max` times [`LAMBDA_MAX_SLACK`].
pub fn estimate_lambda_max(op: &Operator) -> Result<f64> {
    let est = lambda_max_power(op, 2000, 1e-9)?;
    Ok(est.value * LAMBDA_MAX_SLACK)
}

pub fn cheb_apply(filter: &ChebFilter, op: &Operator, x: &Matrix) -> Result<Matrix> {
    if x.rows() != op.n() {
        return Err(Error::ShapeMismatch { op: "cheb_apply", detail: format!("X has {} rows, operator is {}", x.rows(), op.n()) });
    }
    if x.cols() != filter.in_channels() {
        return Err(Error::ShapeMismatch {
            op: "cheb_apply",
            detail: format!("X has {} channels, filter expects {}", x.cols(), filter.in_channels()),
        });
    }
    let scaled = scale_operator(op, filter.lambda_max)?;
    let coeffs = &filter.coefficients;
    let mut y = x.matmul(&coeffs[0]);
    if coeffs.len() == 1 {
        return Ok(y);
    }
    let mut prev = x.clone();
    let mut cur = scaled.apply(x);
    y.add_assign(&cur.matmul(&coeffs[1]));
    for theta in &coeffs[2..] {
        let mut next = scaled.apply(&cur).scale(2.0);
        next.axpy(-1.0, &prev);
        y.add_assign(&next.matmul(theta));
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(y)
}

/// Filtering with `L_μ` (or its normalized form) in place of `L`.
pub fn cheb_apply_be(filter: &ChebFilter, be: &BeOperator<'_>, normalization: Option<Normalization>, x: &Matrix) -> Result<Matrix> {
    let op = match normalization {
        None => be.laplacian(),
        Some(kind) => be.normalized(kind)?,
    };
    cheb_apply(filter, &op, x)
}

/// `T_k(t)` for scalar `t`.
pub fn chebyshev_t(k: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    match k {
        0 => a,
        _ => {
            for _ in 1..k {
                let c = 2.0 * t * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}
