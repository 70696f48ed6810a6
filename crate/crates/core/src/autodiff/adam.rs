use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (first, second) = shapes.into_iter().map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c))).unzip();
        Self { config, step: 0, first, second }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        assert_eq!(params.len(), self.first.len(), "parameter count");
        assert_eq!(grads.len(), self.first.len(), "gradient count");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps, weight_decay } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.shape(), g.shape(), "gradient shape");
            let m = self.first[k].as_mut_slice();
            let v = self.second[k].as_mut_slice();
            for (i, (pv, &gv)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                let gv = gv + weight_decay * *pv;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gv;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gv * gv;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Matrix::from_vec(1, 2, vec![1.0, -3.0])];
        let before = params.clone();
        let mut adam = Adam::new(AdamConfig::default(), [(1, 2)]);
        adam.step(&mut params, &[Matrix::zeros(1, 2)]);
        assert_eq!(params, before);
    }

    #[test]
    fn descends_on_square() {
        let mut x = vec![Matrix::filled(1, 1, 1.0)];
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, [(1, 1)]);
        let g = x[0].scale(2.0);
        adam.step(&mut x, &[g]);
        assert!(x[0][(0, 0)] < 1.0);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(x) = ½ (x − c)ᵀ H (x − c) with H = diag(1, 4, 0.5); optimum x* = c.
        let h = [1.0, 4.0, 0.5];
        let c = [2.0, -1.0, 0.5];
        let mut x = vec![Matrix::zeros(1, 3)];
        let mut adam = Adam::new(AdamConfig { lr: 0.05, ..Default::default() }, [(1, 3)]);
        for _ in 0..200 {
            let g: Vec<f64> = (0..3).map(|i| h[i] * (x[0][(0, i)] - c[i])).collect();
            adam.step(&mut x, &[Matrix::from_vec(1, 3, g)]);
        }
        let err: f64 = (0..3).map(|i| (x[0][(0, i)] - c[i]).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-3, "distance to optimum {err}");
    }
}
