//! μ-ChebNet and its stable residual variant.
//!
//! A GCN parameterizer maps node inputs to a strictly positive potential
//! `μ`; the network then filters with Chebyshev polynomials of `L_μ` (or
//! its symmetric normalization) rescaled by a power-iteration `λ_max` that
//! is held constant during differentiation. With `mu: null` the same code
//! path runs a plain ChebNet on the combinatorial Laplacian.

pub mod loss;
mod params;

pub use loss::LossKind;
pub use params::ParamStore;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::autodiff::{softplus, Tape, Var};
use crate::be::DEFAULT_MU_FLOOR;
use crate::chebyshev::estimate_lambda_max;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::operator::Operator;
use params::Init;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `D_μ^{-1/2} L_μ D_μ^{-1/2}`.
    #[default]
    Sym,
    Unnorm,
}

/// What the parameterizer sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuInput {
    /// Node features, or the degree when there are none.
    #[default]
    Features,
    Degree,
    FeaturesAndDegree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuConfig {
    pub layers: usize,
    pub hidden: usize,
    pub eps_floor: f64,
    pub input: MuInput,
    /// Start from a zero output head, i.e. `μ ≡ softplus(0) + ε` everywhere.
    pub zero_head: bool,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self { layers: 2, hidden: 16, eps_floor: DEFAULT_MU_FLOOR, input: MuInput::Features, zero_head: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub hidden: usize,
    pub operator: OperatorKind,
    pub stable: bool,
    pub gamma: f64,
    pub eps: f64,
    /// `None` runs a plain ChebNet (`μ ≡ 1`).
    pub mu: Option<MuConfig>,
    /// `tanh` after each stable update.
    pub post_activation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            k: 9,
            hidden: 32,
            operator: OperatorKind::Sym,
            stable: false,
            gamma: 0.05,
            eps: 0.1,
            mu: Some(MuConfig::default()),
            post_activation: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.to_string()));
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and nonnegative");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps must be finite and nonnegative");
        }
        if let Some(mu) = &self.mu {
            if mu.hidden == 0 {
                return bad("mu.hidden must be at least 1");
            }
            if !(mu.eps_floor > 0.0 && mu.eps_floor.is_finite()) {
                return bad("mu.eps_floor must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// One prediction row per node.
    Node,
    /// Mean pooling, then one row per graph.
    Graph,
}

/// A graph and its node features, with per-graph caches.
#[derive(Debug)]
pub struct ModelInput {
    graph: Arc<Graph>,
    x: Matrix,
    gcn: OnceLock<Arc<Operator>>,
    plain: [OnceLock<(Arc<Operator>, f64)>; 2],
}

impl ModelInput {
    pub fn new(graph: Arc<Graph>, x: Matrix) -> Result<Self> {
        if x.rows() != graph.n() {
            return Err(Error::ShapeMismatch {
                op: "model input",
                detail: format!("{} feature rows for {} nodes", x.rows(), graph.n()),
            });
        }
        Ok(Self { graph, x, gcn: OnceLock::new(), plain: [OnceLock::new(), OnceLock::new()] })
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    fn gcn(&self) -> &Arc<Operator> {
        self.gcn.get_or_init(|| Arc::new(Operator::gcn_propagation(&self.graph)))
    }

    /// The fixed operator and its `λ_max` estimate for `μ ≡ 1`.
    fn plain(&self, kind: OperatorKind) -> Result<(Arc<Operator>, f64)> {
        let cell = &self.plain[kind as usize];
        if let Some(hit) = cell.get() {
            return Ok(hit.clone());
        }
        let ones = vec![1.0; self.graph.m()];
        let op = build_operator(&self.graph, &ones, kind)?;
        let lambda = estimate_lambda_max(&op)?;
        let _ = cell.set((Arc::new(op), lambda));
        Ok(cell.get().expect("just set").clone())
    }

    fn mu_features(&self, input: MuInput) -> Matrix {
        let deg = Matrix::column(&self.graph.degrees());
        match input {
            MuInput::Features if self.x.cols() > 0 => self.x.clone(),
            MuInput::Features | MuInput::Degree => deg,
            MuInput::FeaturesAndDegree => Matrix::hstack(&[&self.x, &deg]),
        }
    }
}

fn build_operator(g: &Graph, weights: &[f64], kind: OperatorKind) -> Result<Operator> {
    match kind {
        OperatorKind::Unnorm => Ok(Operator::weighted_laplacian(g, weights)),
        OperatorKind::Sym => {
            let deg = crate::operator::weighted_degrees(g, weights);
            if let Some(i) = deg.iter().position(|&d| !(d > 0.0)) {
                return Err(Error::IsolatedNodeUnderMu(i));
            }
            let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
            Ok(Operator::scaled_laplacian(g, weights, &s))
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ForwardOptions {
    /// Use this `λ_max` instead of a fresh estimate.
    pub lambda_max: Option<f64>,
    /// Replace the parameterizer output by a constant potential.
    pub constant_mu: Option<f64>,
}

#[derive(Debug)]
pub struct Forward {
    pub output: Var,
    pub mu: Option<Var>,
    /// `None` when no layer propagates (`K = 0`).
    pub lambda_max: Option<f64>,
    /// Frobenius norm of the hidden state after the input map and after each layer.
    pub hidden_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub output: Matrix,
    pub mu: Option<Vec<f64>>,
    pub lambda_max: Option<f64>,
    pub hidden_norms: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    mu_gcn: Vec<Linear>,
    mu_head: Option<Linear>,
    encoder: Option<Linear>,
    cheb: Vec<Linear>,
    /// Per stable layer, one square weight per order.
    stable: Vec<Vec<usize>>,
    readout: Linear,
}

/// Propagation operator of one forward pass.
enum Prop {
    Fixed(Arc<Operator>),
    Learned { w: Var, s: Option<Var> },
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    in_dim: usize,
    out_dim: usize,
    readout: Readout,
    mu_in_dim: usize,
    params: ParamStore,
    layout: Layout,
}

impl Model {
    /// `mu_in_dim` is the width of the parameterizer input, see [`Model::mu_input_dim`].
    pub fn new(config: ModelConfig, in_dim: usize, out_dim: usize, readout: Readout, seed: u64) -> Result<Self> {
        config.validate()?;
        if out_dim == 0 {
            return Err(Error::ConfigInvalid("output width must be at least 1".into()));
        }
        let mu_in_dim = Self::mu_input_dim(&config, in_dim);
        let mut init = Init::new(seed);
        let mut params = ParamStore::new();
        let linear = |params: &mut ParamStore, init: &mut Init, name: &str, rows: usize, cols: usize, fan_in: usize| {
            let w = params.push(format!("{name}.weight"), init.uniform(rows, cols, fan_in));
            let b = params.push(format!("{name}.bias"), Matrix::zeros(1, cols));
            Linear { w, b }
        };
        let (mut mu_gcn, mut mu_head) = (Vec::new(), None);
        if let Some(mu) = &config.mu {
            let mut width = mu_in_dim;
            for l in 0..mu.layers {
                mu_gcn.push(linear(&mut params, &mut init, &format!("mu.gcn{l}"), width, mu.hidden, width));
                width = mu.hidden;
            }
            let head = linear(&mut params, &mut init, "mu.head", width, 1, width);
            if mu.zero_head {
                params.values_mut()[head.w] = Matrix::zeros(width, 1);
            }
            mu_head = Some(head);
        }
        let h = config.hidden;
        let (mut encoder, mut cheb, mut stable) = (None, Vec::new(), Vec::new());
        if config.stable {
            encoder = Some(linear(&mut params, &mut init, "encoder", in_dim, h, in_dim));
            for l in 0..config.layers {
                let ws = (0..=config.k)
                    .map(|k| params.push(format!("stable{l}.w{k}"), init.uniform(h, h, h)))
                    .collect();
                stable.push(ws);
            }
        } else {
            let mut width = in_dim;
            for l in 0..config.layers {
                // Θ_0..Θ_K stacked vertically; each block initialized with its own fan-in.
                let blocks: Vec<Matrix> = (0..=config.k).map(|_| init.uniform(width, h, width)).collect();
                let mut theta = Vec::with_capacity((config.k + 1) * width * h);
                blocks.iter().for_each(|b| theta.extend_from_slice(b.as_slice()));
                let w = params.push(format!("cheb{l}.theta"), Matrix::from_vec((config.k + 1) * width, h, theta));
                let b = params.push(format!("cheb{l}.bias"), Matrix::zeros(1, h));
                cheb.push(Linear { w, b });
                width = h;
            }
        }
        let readout_layer = linear(&mut params, &mut init, "readout", h, out_dim, h);
        let layout = Layout { mu_gcn, mu_head, encoder, cheb, stable, readout: readout_layer };
        Ok(Self { config, in_dim, out_dim, readout, mu_in_dim, params, layout })
    }

    pub fn mu_input_dim(config: &ModelConfig, in_dim: usize) -> usize {
        match config.mu.as_ref().map(|m| m.input) {
            Some(MuInput::Features) if in_dim > 0 => in_dim,
            Some(MuInput::FeaturesAndDegree) => in_dim + 1,
            _ => 1,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Effective stable weights `W_k − W_kᵀ − γI` for layer `l`.
    pub fn stable_weights(&self, layer: usize) -> Vec<Matrix> {
        let gamma_i = Matrix::identity(self.config.hidden).scale(self.config.gamma);
        self.layout
            .stable
            .get(layer)
            .map(|ws| ws.iter().map(|&i| { let w = &self.params.values()[i]; w.sub(&w.transpose()).sub(&gamma_i) }).collect())
            .unwrap_or_default()
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        if input.x.cols() != self.in_dim {
            return Err(Error::ShapeMismatch {
                op: "model forward",
                detail: format!("{} feature columns, model expects {}", input.x.cols(), self.in_dim),
            });
        }
        Ok(())
    }

    fn linear(&self, tape: &mut Tape, vars: &[Var], layer: &Linear, x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars[layer.w])?;
        tape.add_row(y, vars[layer.b])
    }

    /// The potential `softplus(GCN(x)) + ε` as an `n × 1` column.
    pub fn mu_forward(&self, tape: &mut Tape, vars: &[Var], input: &ModelInput) -> Result<Option<Var>> {
        let (Some(cfg), Some(head)) = (&self.config.mu, &self.layout.mu_head) else {
            return Ok(None);
        };
        let feats = input.mu_features(cfg.input);
        if feats.cols() != self.mu_in_dim {
            return Err(Error::ShapeMismatch {
                op: "mu_forward",
                detail: format!("{} input columns, parameterizer expects {}", feats.cols(), self.mu_in_dim),
            });
        }
        let gcn = Arc::clone(input.gcn());
        let mut h = tape.constant(feats);
        for layer in &self.layout.mu_gcn {
            let z = tape.matmul(h, vars[layer.w])?;
            let z = tape.const_op(&gcn, z)?;
            let z = tape.add_row(z, vars[layer.b])?;
            h = tape.relu(z);
        }
        let z = self.linear(tape, vars, head, h)?;
        let mu = tape.softplus(z);
        Ok(Some(tape.offset(mu, cfg.eps_floor)))
    }

    fn propagation(&self, tape: &mut Tape, mu: Option<Var>, input: &ModelInput, needs_lambda: bool, opts: &ForwardOptions) -> Result<(Prop, Option<f64>)> {
        let g = &input.graph;
        let kind = self.config.operator;
        let Some(mu) = mu else {
            let (op, lambda) = input.plain(kind)?;
            return Ok((Prop::Fixed(op), Some(opts.lambda_max.unwrap_or(lambda))));
        };
        let w = tape.edge_weights(mu, g)?;
        let s = match kind {
            OperatorKind::Unnorm => None,
            OperatorKind::Sym => {
                let deg = tape.degree_scatter(w, g)?;
                if let Some(i) = tape.value(deg).as_slice().iter().position(|&d| !(d > 0.0)) {
                    return Err(Error::IsolatedNodeUnderMu(i));
                }
                Some(tape.powf(deg, -0.5))
            }
        };
        let lambda = match (opts.lambda_max, needs_lambda) {
            (Some(l), _) => Some(l),
            (None, false) => None,
            (None, true) => Some(estimate_lambda_max(&build_operator(g, tape.value(w).as_slice(), kind)?)?),
        };
        Ok((Prop::Learned { w, s }, lambda))
    }

    fn apply_prop(tape: &mut Tape, prop: &Prop, g: &Arc<Graph>, x: Var) -> Result<Var> {
        match prop {
            Prop::Fixed(op) => tape.const_op(op, x),
            Prop::Learned { w, s: None } => tape.weighted_laplacian(*w, x, g),
            Prop::Learned { w, s: Some(s) } => {
                let y = tape.row_scale(x, *s)?;
                let y = tape.weighted_laplacian(*w, y, g)?;
                tape.row_scale(y, *s)
            }
        }
    }

    /// `[T_0(L̃)X, …, T_K(L̃)X]`.
    fn basis(&self, tape: &mut Tape, prop: &Prop, g: &Arc<Graph>, lambda: Option<f64>, x: Var) -> Result<Vec<Var>> {
        let mut out = vec![x];
        if self.config.k == 0 {
            return Ok(out);
        }
        let lambda = lambda.expect("λ_max is computed whenever K > 0");
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveLambdaMax(lambda));
        }
        let scaled = |tape: &mut Tape, v: Var| -> Result<Var> {
            let lv = Self::apply_prop(tape, prop, g, v)?;
            let lv = tape.scale(lv, 2.0 / lambda);
            tape.sub(lv, v)
        };
        out.push(scaled(tape, x)?);
        for k in 2..=self.config.k {
            let lt = scaled(tape, out[k - 1])?;
            let lt = tape.scale(lt, 2.0);
            let next = tape.sub(lt, out[k - 2])?;
            out.push(next);
        }
        Ok(out)
    }

    /// Records the full network on `tape`. `vars` come from [`ParamStore::bind`].
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: &ModelInput, opts: &ForwardOptions) -> Result<Forward> {
        self.check_input(input)?;
        if vars.len() != self.params.len() {
            return Err(Error::LengthMismatch { expected: self.params.len(), got: vars.len() });
        }
        let g = &input.graph;
        let mu = match opts.constant_mu {
            Some(c) if self.config.mu.is_some() => Some(tape.constant(Matrix::filled(g.n(), 1, c))),
            _ => self.mu_forward(tape, vars, input)?,
        };
        let (prop, lambda) = self.propagation(tape, mu, input, self.config.k > 0, opts)?;
        let mut h = tape.constant(input.x.clone());
        let mut norms = Vec::with_capacity(self.config.layers + 1);
        if let Some(enc) = &self.layout.encoder {
            h = self.linear(tape, vars, enc, h)?;
            norms.push(tape.value(h).frobenius());
            let gamma_i = tape.constant(Matrix::identity(self.config.hidden).scale(self.config.gamma));
            for ws in &self.layout.stable {
                let basis = self.basis(tape, &prop, g, lambda, h)?;
                let mut acc: Option<Var> = None;
                for (t, &wi) in basis.into_iter().zip(ws) {
                    let wt = tape.transpose(vars[wi]);
                    let a = tape.sub(vars[wi], wt)?;
                    let a = tape.sub(a, gamma_i)?;
                    let term = tape.matmul(t, a)?;
                    acc = Some(match acc {
                        None => term,
                        Some(prev) => tape.add(prev, term)?,
                    });
                }
                let step = tape.scale(acc.expect("at least T_0"), self.config.eps);
                h = tape.add(h, step)?;
                if self.config.post_activation {
                    h = tape.tanh(h);
                }
                norms.push(tape.value(h).frobenius());
            }
        } else {
            norms.push(tape.value(h).frobenius());
            for layer in &self.layout.cheb {
                let basis = self.basis(tape, &prop, g, lambda, h)?;
                let cat = if basis.len() == 1 { basis[0] } else { tape.concat_cols(&basis)? };
                let z = self.linear(tape, vars, layer, cat)?;
                h = tape.relu(z);
                norms.push(tape.value(h).frobenius());
            }
        }
        if self.readout == Readout::Graph {
            h = tape.mean_rows(h);
        }
        let output = self.linear(tape, vars, &self.layout.readout, h)?;
        Ok(Forward { output, mu, lambda_max: lambda, hidden_norms: norms })
    }

    /// Forward pass without gradients.
    pub fn predict(&self, input: &ModelInput, opts: &ForwardOptions) -> Result<Prediction> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let fwd = self.forward(&mut tape, &vars, input, opts)?;
        Ok(Prediction {
            output: tape.value(fwd.output).clone(),
            mu: fwd.mu.map(|m| tape.value(m).as_slice().to_vec()),
            lambda_max: fwd.lambda_max,
            hidden_norms: fwd.hidden_norms,
        })
    }

    /// The learned potential alone, without running the filters.
    pub fn potential(&self, input: &ModelInput) -> Result<Option<Vec<f64>>> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        Ok(self.mu_forward(&mut tape, &vars, input)?.map(|m| tape.value(m).as_slice().to_vec()))
    }

    /// Loss value and its gradient for every parameter tensor.
    pub fn loss_and_grads(
        &self,
        input: &ModelInput,
        target: &Matrix,
        mask: &[bool],
        kind: LossKind,
        opts: &ForwardOptions,
    ) -> Result<(f64, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, true);
        let fwd = self.forward(&mut tape, &vars, input, opts)?;
        let l = loss::loss(&mut tape, kind, fwd.output, target, mask)?;
        let grads = tape.backward(l)?;
        let value = tape.value(l)[(0, 0)];
        let shapes = self.params.shapes();
        Ok((value, vars.iter().zip(shapes).map(|(&v, s)| grads.wrt(v, s)).collect()))
    }

    /// Loss value only.
    pub fn loss_value(&self, input: &ModelInput, target: &Matrix, mask: &[bool], kind: LossKind, opts: &ForwardOptions) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let fwd = self.forward(&mut tape, &vars, input, opts)?;
        let l = loss::loss(&mut tape, kind, fwd.output, target, mask)?;
        Ok(tape.value(l)[(0, 0)])
    }
}

/// Value of the parameterizer head for an all-zero head: `softplus(0) + ε`.
pub fn zero_head_potential(eps_floor: f64) -> f64 {
    softplus(0.0) + eps_floor
}
