//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by implicit-shift QL iteration. Deterministic for a given
//! input; eigenvalues ascending, eigenvector signs fixed so that the first
//! non-negligible component is positive.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};
use crate::operator::{Operator, DENSE_LIMIT};

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.col(k)
    }

    /// `Uᵀ f`
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        self.eigenvectors.transpose().matvec(f)
    }

    /// `U c`
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.eigenvectors.matvec(coeffs)
    }

    /// `U diag(h(λ)) Uᵀ X`
    pub fn apply_spectral_fn(&self, x: &Matrix, h: impl Fn(f64) -> f64) -> Matrix {
        let mut coeffs = self.eigenvectors.t_matmul(x);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = h(lambda);
            for v in coeffs.row_mut(k) {
                *v *= s;
            }
        }
        self.eigenvectors.matmul(&coeffs)
    }

    /// `max_{ij} |(UᵀU − I)_{ij}|`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.t_matmul(&self.eigenvectors);
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max_k ‖A u_k − λ_k u_k‖₂`
    pub fn max_residual(&self, op: &Operator) -> f64 {
        (0..self.n())
            .map(|k| {
                let u = self.vector(k);
                let au = op.matvec(&u);
                let r: Vec<f64> = au.iter().zip(&u).map(|(a, b)| a - self.eigenvalues[k] * b).collect();
                norm2(&r)
            })
            .fold(0.0, f64::max)
    }
}

pub fn eig_sym(op: &Operator) -> Result<SpectralDecomposition> {
    let n = op.n();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    eig_sym_dense(&op.to_dense()?)
}

pub fn eig_sym_dense(a: &Matrix) -> Result<SpectralDecomposition> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch { op: "eig_sym", detail: format!("{}x{} is not square", n, a.cols()) });
    }
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let scale = a.max_abs();
    let asym = a.asymmetry();
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: Vec::new(), eigenvectors: Matrix::zeros(0, 0) });
    }

    // Symmetrize exactly so tiny asymmetries do not leak into the reduction.
    let mut v = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    // Ascending order, stable for equal eigenvalues.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.col(src);
        let threshold = 1e-10 * col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let flip = col.iter().find(|x| x.abs() > threshold).is_some_and(|&x| x < 0.0);
        for i in 0..n {
            eigenvectors[(i, dst)] = if flip { -col[i] } else { col[i] };
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Householder reduction of the symmetric matrix held in `v` (overwritten
/// with the accumulated orthogonal transform). On return `d` is the
/// diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, rotating the columns of `v`.
fn tridiagonal_ql(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_sweeps = 60 * n.max(1);
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NotConverged { iterations: sweeps, estimate: d[l] });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The dense eigensolver supplied the value after power iteration stalled.
    pub used_fallback: bool,
}

/// Operators below this size fall back to the dense solver when power
/// iteration does not converge.
pub const POWER_FALLBACK_LIMIT: usize = 512;

/// Largest eigenvalue of a PSD operator by power iteration with a Rayleigh
/// quotient estimate (which never exceeds the true value).
pub fn lambda_max_power(op: &Operator, iters: usize, tol: f64) -> Result<PowerEstimate> {
    let n = op.n();
    if n == 0 {
        return Ok(PowerEstimate { value: 0.0, iterations: 0, converged: true, used_fallback: false });
    }
    let mut v = start_vector(n);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = op.matvec(&v);
    let mut estimate = dot(&v, &av);
    for it in 1..=iters {
        let norm = norm2(&av);
        if norm == 0.0 {
            return Ok(PowerEstimate { value: 0.0, iterations: it, converged: true, used_fallback: false });
        }
        v = av.iter().map(|x| x / norm).collect();
        av = op.matvec(&v);
        let next = dot(&v, &av);
        let residual: f64 = av.iter().zip(&v).map(|(a, b)| (a - next * b).powi(2)).sum::<f64>().sqrt();
        let settled = (next - estimate).abs() <= tol * next.abs() && residual <= tol.sqrt() * next.abs();
        estimate = next;
        if settled {
            return Ok(PowerEstimate { value: estimate, iterations: it, converged: true, used_fallback: false });
        }
    }
    if n < POWER_FALLBACK_LIMIT {
        let dec = eig_sym(op)?;
        let top = *dec.eigenvalues.last().expect("nonempty");
        return Ok(PowerEstimate { value: top, iterations: iters, converged: false, used_fallback: true });
    }
    Err(Error::NotConverged { iterations: iters, estimate })
}

/// Fixed pseudo-random start vector with strictly positive entries.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.5 + ((state >> 11) as f64) / ((1u64 << 53) as f64)
        })
        .collect()
}
