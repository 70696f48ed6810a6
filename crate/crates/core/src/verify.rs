//! Self-checking invariant suites behind `be-spectral verify`.
//!
//! Each suite returns a list of checks of the form `value ≤ threshold`.
//! Asserted checks decide the suite's verdict; the others are reported.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use crate::autodiff::check::{central_differences, relative_error};
use crate::be::{BeOperator, Potential};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{dot, Matrix};
use crate::models::{ForwardOptions, LossKind, Model, ModelConfig, ModelInput, MuConfig, OperatorKind, Readout};
use crate::spectral::theory::{corollary_star_check, eigenvalue_bounds, StarCorollary};
use crate::spectral::{eig_sym, eig_sym_dense, rayleigh_factorization_check};
use crate::tasks::{erdos_renyi, gen_barbell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Lemma,
    Corollaries,
    Gradcheck,
    Stability,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Algebra, Suite::Lemma, Suite::Corollaries, Suite::Gradcheck, Suite::Stability];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Lemma => "lemma",
            Suite::Corollaries => "corollaries",
            Suite::Gradcheck => "gradcheck",
            Suite::Stability => "stability",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Star sizes for the corollary suite.
    pub star_sizes: Vec<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, star_sizes: vec![5, 6, 10, 50] }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub asserted: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold, asserted: true }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold, asserted: true }
    }

    fn reported(mut self) -> Self {
        self.asserted = false;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let started = Instant::now();
    let (checks, details) = match suite {
        Suite::Algebra => algebra(opts.seed)?,
        Suite::Lemma => lemma(opts.seed)?,
        Suite::Corollaries => corollaries(&opts.star_sizes)?,
        Suite::Gradcheck => gradcheck(opts.seed)?,
        Suite::Stability => stability(opts.seed)?,
    };
    let passed = checks.iter().filter(|c| c.asserted).all(|c| c.passed);
    Ok(SuiteReport { suite, passed, seconds: started.elapsed().as_secs_f64(), checks, details })
}

/// A random graph with `n_min..=n_max` nodes and at least one edge.
pub fn random_graph(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> Result<Graph> {
    loop {
        let n = rng.random_range(n_min..=n_max);
        let p = rng.random_range(0.1..0.6);
        let g = erdos_renyi(n, p, rng)?;
        if g.m() > 0 {
            return Ok(g);
        }
    }
}

pub fn random_connected_graph(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> Result<Graph> {
    loop {
        let g = random_graph(rng, n_min, n_max)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
}

pub fn random_potential(rng: &mut ChaCha8Rng, n: usize) -> Result<Potential> {
    Potential::new((0..n).map(|_| rng.random_range(0.05..3.0)).collect())
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

type SuiteOutput = (Vec<Check>, serde_json::Value);

fn algebra(seed: u64) -> Result<SuiteOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = 100;
    let (mut reduction, mut dirichlet, mut psd, mut rows, mut decomposition, mut adjoint) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..graphs {
        let g = random_graph(&mut rng, 2, 30)?;
        let n = g.n();
        let lap = g.laplacian().to_dense()?;
        let ones = BeOperator::new(&g, Potential::constant(n, 1.0)?)?.laplacian().to_dense()?;
        reduction = reduction.max(ones.sub(&lap).max_abs());

        let be = BeOperator::new(&g, random_potential(&mut rng, n)?)?;
        let lmu = be.laplacian();
        let dense = lmu.to_dense()?;
        let scale = dense.max_abs().max(f64::MIN_POSITIVE);
        let (f, h) = (gaussian(&mut rng, n), gaussian(&mut rng, n));
        let quad = dot(&f, &lmu.matvec(&h));
        let sum = be.dirichlet_sum(&f, &h)?;
        dirichlet = dirichlet.max((quad - sum).abs() / quad.abs().max(sum.abs()).max(f64::MIN_POSITIVE));

        let eig = eig_sym(&lmu)?;
        psd = psd.max(-eig.eigenvalues[0] / scale);
        rows = rows.max(lmu.row_sums().iter().fold(0f64, |m, r| m.max(r.abs())) / scale);

        let parts = be.advection_decomposition(&f)?;
        let direct = be.apply(&f)?;
        let fscale = scale * f.iter().fold(0f64, |m, v| m.max(v.abs()));
        let gap = parts.combined().iter().zip(&direct).fold(0f64, |m, (a, b)| m.max((a - b).abs()));
        decomposition = decomposition.max(gap / fscale);

        // ⟨∇f, e⟩ on edges equals ⟨f, ∇*e⟩ on nodes.
        let e = gaussian(&mut rng, g.m());
        let lhs = dot(&g.grad(&f)?, &e);
        let rhs = dot(&f, &g.grad_adjoint(&e)?);
        adjoint = adjoint.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    let checks = vec![
        Check::at_most("unit potential reproduces L (max abs difference)", reduction, 0.0),
        Check::at_most("Dirichlet identity relative error", dirichlet, 1e-10),
        Check::at_most("negative eigenvalue relative to max|L_mu|", psd, 1e-10),
        Check::at_most("row sums relative to max|L_mu|", rows, 1e-12),
        Check::at_most("advection-diffusion reconstruction relative to scale", decomposition, 1e-12),
        Check::at_most("gradient adjoint identity", adjoint, 1e-12),
    ];
    Ok((checks, json!({ "graphs": graphs, "seed": seed })))
}

fn lemma(seed: u64) -> Result<SuiteOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 200;
    let mut worst = 0f64;
    for _ in 0..samples {
        let g = random_graph(&mut rng, 3, 25)?;
        let mu = random_potential(&mut rng, g.n())?;
        let f = gaussian(&mut rng, g.n());
        worst = worst.max(rayleigh_factorization_check(&g, &mu, &f)?.relative_gap());
    }

    let (mut violations, mut rows_checked, mut scale_gap) = (0usize, 0usize, 0f64);
    for _ in 0..20 {
        let g = random_connected_graph(&mut rng, 4, 20)?;
        let mu = random_potential(&mut rng, g.n())?;
        let rows = eigenvalue_bounds(&g, &mu, 100, rng.random())?;
        rows_checked += rows.len();
        violations += rows.iter().filter(|r| !r.holds(1e-9)).count();
        let base = eig_sym(&BeOperator::new(&g, mu.clone())?.laplacian())?.eigenvalues;
        for c in [2.0, 0.37] {
            let scaled = eig_sym(&BeOperator::new(&g, mu.scaled(c)?)?.laplacian())?.eigenvalues;
            let top = base.last().copied().unwrap_or(1.0).abs().max(1.0) * c;
            for (a, b) in base.iter().zip(&scaled) {
                scale_gap = scale_gap.max((c * a - b).abs() / top);
            }
        }
    }
    let checks = vec![
        Check::at_most("Rayleigh factorization relative gap", worst, 1e-10),
        Check::at_most("eigenvalue bound violations", violations as f64, 0.0),
        Check::at_most("scale law relative gap", scale_gap, 1e-12),
    ];
    Ok((checks, json!({ "samples": samples, "bound_rows": rows_checked, "seed": seed })))
}

fn corollaries(sizes: &[usize]) -> Result<SuiteOutput> {
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for &n in sizes {
        for which in [StarCorollary::Cor1, StarCorollary::Cor2] {
            let rep = corollary_star_check(n, which)?;
            let tag = match which {
                StarCorollary::Cor1 => "cor1",
                StarCorollary::Cor2 => "cor2",
            };
            for c in &rep.checks {
                let check = Check::at_least(format!("{tag} n={n}: {} (slack)", c.name), c.slack, -1e-12 * c.rhs.abs().max(1.0));
                checks.push(if c.asserted { check } else { check.reported() });
            }
            if which == StarCorollary::Cor1 && n == 6 {
                checks.push(Check::at_most("cor1 n=6: |lambda_1_mu - 1/8|", (rep.lambda_1_mu - 0.125).abs(), 1e-9));
            }
            reports.push(rep);
        }
    }
    Ok((checks, serde_json::to_value(reports)?))
}

/// A small μ-ChebNet used for finite-difference checks.
pub fn gradcheck_config(operator: OperatorKind) -> ModelConfig {
    ModelConfig {
        layers: 2,
        k: 3,
        hidden: 4,
        operator,
        mu: Some(MuConfig { hidden: 3, zero_head: false, ..MuConfig::default() }),
        ..ModelConfig::default()
    }
}

/// Largest relative error between backprop and central differences, with
/// `λ_max` pinned at its value for the unperturbed parameters.
pub fn model_gradcheck(model: &Model, input: &ModelInput, target: &Matrix, mask: &[bool], kind: LossKind) -> Result<f64> {
    let lambda = model.predict(input, &ForwardOptions::default())?.lambda_max;
    let opts = ForwardOptions { lambda_max: lambda, ..Default::default() };
    let (_, analytic) = model.loss_and_grads(input, target, mask, kind, &opts)?;
    let mut probe = model.clone();
    let mut failure = None;
    let numeric = central_differences(model.params().values(), 1e-5, |p| {
        let value = probe.params_mut().set_values(p.to_vec()).and_then(|_| probe.loss_value(input, target, mask, kind, &opts));
        value.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(analytic.iter().zip(&numeric).map(|(a, n)| relative_error(a, n, 1e-6)).fold(0.0, f64::max))
}

/// Moves every tensor, zero-initialized biases included, off its init so
/// no relu input sits exactly on the kink.
pub fn randomize(model: &mut Model, rng: &mut ChaCha8Rng) -> Result<()> {
    let values = model
        .params()
        .values()
        .iter()
        .map(|m| {
            let noise = gaussian(rng, m.rows() * m.cols());
            Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().zip(noise).map(|(v, z)| v + 0.3 * z).collect())
        })
        .collect();
    model.params_mut().set_values(values)
}

fn gradcheck(seed: u64) -> Result<SuiteOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = 20;
    let mut errors = Vec::with_capacity(points);
    for i in 0..points {
        let g = random_connected_graph(&mut rng, 8, 16)?;
        let n = g.n();
        let x = Matrix::from_vec(n, 2, gaussian(&mut rng, 2 * n));
        let target = Matrix::column(&gaussian(&mut rng, n));
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        mask[0] = true;
        let op = if i % 2 == 0 { OperatorKind::Sym } else { OperatorKind::Unnorm };
        let mut model = Model::new(gradcheck_config(op), 2, 1, Readout::Node, rng.random())?;
        randomize(&mut model, &mut rng)?;
        let input = ModelInput::new(Arc::new(g), x)?;
        errors.push(model_gradcheck(&model, &input, &target, &mask, LossKind::Mse)?);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Ok((vec![Check::at_most("max relative gradient error", worst, 1e-4)], json!({ "points": points, "errors": errors })))
}

/// Eigenvalues `(re, im)` of a general real square matrix.
pub fn general_eigenvalues(m: &Matrix) -> Vec<(f64, f64)> {
    let a = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    a.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let gram = m.t_matmul(m);
    let eig = eig_sym_dense(&gram)?;
    Ok(eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Depth, order and width of the deep stability probe.
pub const STABILITY_LAYERS: usize = 64;
pub const STABILITY_K: usize = 20;
pub const STABILITY_HIDDEN: usize = 16;

#[derive(Clone, Debug, Serialize)]
pub struct DepthProbe {
    pub hidden_norms: Vec<f64>,
    /// Largest `‖X_l‖ / ‖X_first‖` over the layers.
    pub growth: f64,
    pub finite: bool,
}

fn probe(model: &Model, input: &ModelInput, first: usize) -> Result<DepthProbe> {
    let p = model.predict(input, &ForwardOptions::default())?;
    let norms = p.hidden_norms;
    let base = norms[first];
    let growth = norms[first..].iter().map(|v| v / base).fold(0.0, f64::max);
    let finite = norms.iter().all(|v| v.is_finite()) && p.output.is_finite();
    Ok(DepthProbe { hidden_norms: norms, growth, finite })
}

fn stability(seed: u64) -> Result<SuiteOutput> {
    let inst = gen_barbell(23, 4, seed)?;
    let input = inst.model_input()?;
    let stable_cfg = ModelConfig {
        layers: STABILITY_LAYERS,
        k: STABILITY_K,
        hidden: STABILITY_HIDDEN,
        stable: true,
        ..ModelConfig::default()
    };
    let stable = Model::new(stable_cfg.clone(), 1, 1, Readout::Node, seed)?;

    let mut real_part = 0f64;
    let mut damping = 0f64;
    let mut layer_bounds = Vec::with_capacity(STABILITY_LAYERS);
    for l in 0..STABILITY_LAYERS {
        let mut sum_norms = 0.0;
        for k in 0..=STABILITY_K {
            let w = stable.params().get(&format!("stable{l}.w{k}")).ok_or_else(|| Error::ConfigInvalid(format!("missing stable{l}.w{k}")))?;
            let skew = w.sub(&w.transpose());
            real_part = real_part.max(general_eigenvalues(&skew).iter().fold(0f64, |m, z| m.max(z.0.abs())));
            let a = skew.sub(&Matrix::identity(STABILITY_HIDDEN).scale(stable_cfg.gamma));
            damping = damping.max(general_eigenvalues(&a).iter().fold(0f64, |m, z| m.max((z.0 + stable_cfg.gamma).abs())));
            sum_norms += spectral_norm(&a)?;
        }
        layer_bounds.push(1.0 + stable_cfg.eps * sum_norms);
    }

    let stable_run = probe(&stable, &input, 0)?;
    let norms = &stable_run.hidden_norms;
    let excess = (0..STABILITY_LAYERS)
        .map(|l| norms[l + 1] / (norms[l] * layer_bounds[l]))
        .fold(0f64, f64::max);

    let plain_cfg = ModelConfig { layers: STABILITY_LAYERS, k: STABILITY_K, hidden: STABILITY_HIDDEN, mu: None, ..ModelConfig::default() };
    let plain = Model::new(plain_cfg, 1, 1, Readout::Node, seed)?;
    let plain_run = probe(&plain, &input, 1)?;

    let checks = vec![
        Check::at_most("max |Re eig(W - W^T)|", real_part, 1e-10),
        Check::at_most("max |Re eig(W - W^T - gamma I) + gamma|", damping, 1e-10),
        Check::at_least("stable hidden norms finite", stable_run.finite as u8 as f64, 1.0),
        Check::at_most("stable per-layer growth over its bound", excess, 1.0 + 1e-9),
        Check::at_least("unstabilized overall growth", plain_run.growth, 10.0),
        Check::at_least("unstabilized growth over stable growth", plain_run.growth / stable_run.growth, 10.0),
    ];
    Ok((checks, json!({ "stable": stable_run, "unstabilized": plain_run, "layer_bounds": layer_bounds })))
}
