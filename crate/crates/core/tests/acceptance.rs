//! One line per acceptance criterion. Derived quantities are recomputed here
//! from first principles (edge-list assembly, a separate dense eigensolver,
//! trigonometric Chebyshev values, finite differences) and compared with the
//! library's answers.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bespectral::be::{BeOperator, Potential};
use bespectral::chebyshev::{cheb_apply, ChebFilter};
use bespectral::experiment::{train_seed, Dataset, RunConfig, RunRecord};
use bespectral::graph::families::{ring, star};
use bespectral::models::{ForwardOptions, LossKind, Model, ModelConfig, ModelInput, OperatorKind, Readout};
use bespectral::spectral::theory::{corollary_star_check, StarCorollary};
use bespectral::spectral::{eig_sym, rayleigh_factorization_check};
use bespectral::tasks::gen_barbell;
use bespectral::verify::{gradcheck_config, random_connected_graph, random_graph, random_potential, randomize};
use bespectral::{Graph, Matrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Bit patterns of every metric a training criterion produced.
#[derive(Default)]
struct Fingerprints {
    runs: Vec<(String, Vec<u64>)>,
}

fn fingerprint(records: &[RunRecord]) -> Vec<u64> {
    let mut bits = Vec::new();
    for r in records {
        for m in [&r.untrained_test, &r.test] {
            bits.push(m.loss.to_bits());
            bits.extend(m.mse.iter().chain(&m.accuracy).map(|v| v.to_bits()));
        }
        bits.extend(r.history.iter().map(|e| e.train_loss.to_bits()));
        bits.push(r.best_epoch as u64);
        for d in &r.mu {
            bits.extend(d.mu.iter().map(|v| v.to_bits()));
        }
    }
    bits
}

// ---- oracles ----

fn oracle_laplacian(g: &Graph, mu: &[f64]) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let w = 0.5 * (mu[i] + mu[j]);
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Ascending eigenvalues and matching eigenvector columns.
fn oracle_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.nrows(), |i, c| eig.eigenvectors[(i, order[c])]);
    (values, vectors)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn quad(l: &DMatrix<f64>, f: &[f64], h: &[f64]) -> f64 {
    let fv = nalgebra::DVector::from_column_slice(f);
    let hv = nalgebra::DVector::from_column_slice(h);
    fv.dot(&(l * hv))
}

// ---- criteria ----

fn c1_algebra(_: &mut Fingerprints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut reduction, mut dirichlet, mut psd, mut rows, mut recon) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..100 {
        let g = random_graph(&mut rng, 2, 30).unwrap();
        let n = g.n();
        let unit = BeOperator::new(&g, Potential::constant(n, 1.0).unwrap()).unwrap().laplacian().to_dense().unwrap();
        let plain = g.laplacian().to_dense().unwrap();
        reduction = reduction.max(unit.sub(&plain).max_abs()).max((to_dmatrix(&unit) - oracle_laplacian(&g, &vec![1.0; n])).amax());

        let mu = random_potential(&mut rng, n).unwrap();
        let be = BeOperator::new(&g, mu.clone()).unwrap();
        let lmu = be.laplacian();
        let dense = to_dmatrix(&lmu.to_dense().unwrap());
        let scale = dense.amax();
        let (f, h) = (gaussian(&mut rng, n), gaussian(&mut rng, n));

        let mut want = 0.0;
        for i in 0..n {
            for &j in g.neighbors(i) {
                want += 0.5 * mu.values()[i] * (f[i] - f[j]) * (h[i] - h[j]);
            }
        }
        let got = quad(&dense, &f, &h);
        dirichlet = dirichlet.max((got - want).abs() / want.abs().max(got.abs()));

        let (values, _) = oracle_eigen(&dense);
        psd = psd.max(-values[0] / scale);
        rows = rows.max(dense.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max) / scale);

        // diffusion_i = μ_i (Lf)_i, advection_i = ½ Σ_j (μ_j − μ_i)(f_j − f_i)
        let parts = be.advection_decomposition(&f).unwrap();
        let lf = g.laplacian().matvec(&f);
        let lmu_f = &dense * nalgebra::DVector::from_column_slice(&f);
        let fscale = scale * f.iter().fold(0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let m = mu.values();
            let diffusion = m[i] * lf[i];
            let advection: f64 = g.neighbors(i).iter().map(|&j| 0.5 * (m[j] - m[i]) * (f[j] - f[i])).sum();
            let gaps = [
                parts.diffusion[i] - diffusion,
                parts.advection[i] - advection,
                parts.combined()[i] - lmu_f[i],
                diffusion - advection - lmu_f[i],
            ];
            recon = recon.max(gaps.iter().fold(0f64, |a, b| a.max(b.abs())) / fscale);
        }
    }
    let pass = reduction == 0.0 && dirichlet <= 1e-10 && psd <= 1e-10 && rows <= 1e-12 && recon <= 1e-12;
    outcome(
        pass,
        format!("unit-potential gap {reduction:e}, Dirichlet {dirichlet:.1e}, min eig {:.1e}·scale, row sums {rows:.1e}, decomposition {recon:.1e}", -psd),
    )
}

fn c2_showcase(_: &mut Fingerprints) -> Outcome {
    let g = ring(4);
    let plain = eig_sym(&g.laplacian()).unwrap().eigenvalues;
    let mu = Potential::new(vec![1.0, 1.0, 3.0, 1.0]).unwrap();
    let lmu = eig_sym(&BeOperator::new(&g, mu).unwrap().laplacian()).unwrap().eigenvalues;
    let s17 = 17f64.sqrt();
    let want_plain = [0.0, 2.0, 2.0, 4.0];
    let want_mu = [0.0, (9.0 - s17) / 2.0, 3.0, (9.0 + s17) / 2.0];
    let err = plain.iter().zip(&want_plain).chain(lmu.iter().zip(&want_mu)).fold(0f64, |m, (a, b)| m.max((a - b).abs()));
    let min_gap = lmu[1..].windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    outcome(err <= 1e-9 && min_gap > 1e-6, format!("max error {err:.1e}, smallest gap between nonzero L_mu eigenvalues {min_gap:.3}"))
}

fn c3_lemma(_: &mut Fingerprints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut identity, mut library) = (0f64, 0f64);
    for _ in 0..200 {
        let g = random_graph(&mut rng, 3, 25).unwrap();
        let n = g.n();
        let mu = random_potential(&mut rng, n).unwrap();
        let f = gaussian(&mut rng, n);
        let ff: f64 = f.iter().map(|v| v * v).sum();
        let lhs = quad(&oracle_laplacian(&g, mu.values()), &f, &f) / ff;
        let r = quad(&oracle_laplacian(&g, &vec![1.0; n]), &f, &f) / ff;
        let local: Vec<f64> = (0..n).map(|u| g.neighbors(u).iter().map(|&v| (f[u] - f[v]).powi(2)).sum()).collect();
        let total: f64 = local.iter().sum();
        let mass = mu.mass();
        let expectation: f64 = (0..n).map(|u| mu.values()[u] / mass * local[u] / total).sum();
        let rhs = mass * expectation * r;
        identity = identity.max((lhs - rhs).abs() / lhs.abs());
        let lib = rayleigh_factorization_check(&g, &mu, &f).unwrap();
        library = library.max(((lib.lhs - lhs).abs() + (lib.rhs - rhs).abs()) / lhs.abs());
    }
    outcome(identity <= 1e-10 && library <= 1e-10, format!("identity gap {identity:.1e}, library vs direct evaluation {library:.1e} over 200 samples"))
}

fn star_mu(n: usize, cor2: bool) -> Vec<f64> {
    let nf = n as f64;
    (0..n)
        .map(|u| match (cor2, u) {
            (_, 1 | 2) => 0.0,
            (false, _) => 1.0 / (nf - 2.0),
            (true, 0) => 1.0,
            (true, _) => 2.0 * (0.5 / (nf - 1.0) + 1.0 / ((nf - 1.0) * (nf - 3.0))),
        })
        .collect()
}

fn c4_corollaries(_: &mut Fingerprints) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [5, 6, 10, 50] {
        let g = star(n);
        let (lam, vecs) = oracle_eigen(&oracle_laplacian(&g, &vec![1.0; n]));
        let (l1, ltop) = (lam[1], lam[n - 1]);

        let mu1 = star_mu(n, false);
        let l1_mu = oracle_eigen(&oracle_laplacian(&g, &mu1)).0[1];
        let bound = l1 / (2.0 * (n as f64 - 2.0));
        let rep = corollary_star_check(n, StarCorollary::Cor1).unwrap();
        pass &= bound - l1_mu >= -1e-12 && (rep.lambda_1_mu - l1_mu).abs() <= 1e-9 && rep.passed();
        if n == 6 {
            pass &= (l1_mu - 0.125).abs() <= 1e-9;
            notes.push(format!("cor1 n=6 lambda_1_mu={l1_mu:.12}"));
        }

        let mu2 = star_mu(n, true);
        let mass: f64 = mu2.iter().sum();
        let spec2 = oracle_eigen(&oracle_laplacian(&g, &mu2)).0;
        let (l1_mu2, ltop_mu2) = (spec2[1], spec2[n - 1]);
        let top = vecs.column(n - 1);
        let local: Vec<f64> = (0..n).map(|u| g.neighbors(u).iter().map(|&v| (top[u] - top[v]).powi(2)).sum()).collect();
        let total: f64 = local.iter().sum();
        let expectation: f64 = (0..n).map(|u| mu2[u] / mass * local[u] / total).sum();
        let recomputed = mass * ltop * expectation;
        let rep2 = corollary_star_check(n, StarCorollary::Cor2).unwrap();
        pass &= l1_mu2 <= 0.5 * l1 + 1e-12 && recomputed <= ltop_mu2 + 1e-12 && rep2.passed();
        pass &= (rep2.lambda_top_mu - ltop_mu2).abs() <= 1e-9;
        notes.push(format!("cor2 n={n}: lambda_top_mu={ltop_mu2:.4} vs claimed 3/2 lambda_top={:.1} (reported), recomputed bound {recomputed:.4}", 1.5 * ltop));
    }
    outcome(pass, notes.join("; "))
}

fn c5_chebyshev(_: &mut Fingerprints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0f64;
    let mut cases = 0;
    for trial in 0..40 {
        let g = random_graph(&mut rng, 2, 64).unwrap();
        let n = g.n();
        let k = trial % 13;
        let mu = if trial % 2 == 0 { vec![1.0; n] } else { random_potential(&mut rng, n).unwrap().values().to_vec() };
        let op = BeOperator::new(&g, Potential::new(mu.clone()).unwrap()).unwrap().laplacian();
        let (values, vectors) = oracle_eigen(&oracle_laplacian(&g, &mu));
        let lmax = values[n - 1].max(1e-3) * 1.01;
        let thetas: Vec<Matrix> = (0..=k).map(|_| Matrix::from_vec(3, 2, gaussian(&mut rng, 6))).collect();
        let x = Matrix::from_vec(n, 3, gaussian(&mut rng, 3 * n));
        let got = cheb_apply(&ChebFilter::new(lmax, thetas.clone()).unwrap(), &op, &x).unwrap();

        let xd = to_dmatrix(&x);
        let coeffs = vectors.transpose() * &xd;
        let mut want = DMatrix::zeros(n, 2);
        for (kk, theta) in thetas.iter().enumerate() {
            let mut scaled = coeffs.clone();
            for (row, &l) in values.iter().enumerate() {
                let t = (2.0 * l / lmax - 1.0).clamp(-1.0, 1.0);
                let tk = (kk as f64 * t.acos()).cos();
                scaled.row_mut(row).scale_mut(tk);
            }
            want += &vectors * scaled * to_dmatrix(theta);
        }
        let diff = (to_dmatrix(&got) - &want).amax() / want.amax().max(1e-300);
        worst = worst.max(diff);
        cases += 1;
    }
    outcome(worst <= 1e-9, format!("{cases} filters (n ≤ 64, K ≤ 12, L and L_mu): max relative gap {worst:.1e}"))
}

fn finite_differences(model: &Model, input: &ModelInput, target: &Matrix, mask: &[bool], opts: &ForwardOptions) -> Vec<Matrix> {
    let h = 1e-5;
    let base = model.params().values().to_vec();
    let mut probe = model.clone();
    let mut out = Vec::new();
    for p in 0..base.len() {
        let mut grad = vec![0.0; base[p].as_slice().len()];
        for (i, slot) in grad.iter_mut().enumerate() {
            let mut eval = |delta: f64| {
                let mut vals = base.clone();
                vals[p].as_mut_slice()[i] += delta;
                probe.params_mut().set_values(vals).unwrap();
                probe.loss_value(input, target, mask, LossKind::Mse, opts).unwrap()
            };
            *slot = (eval(h) - eval(-h)) / (2.0 * h);
        }
        out.push(Matrix::from_vec(base[p].rows(), base[p].cols(), grad));
    }
    out
}

fn c6_gradcheck(_: &mut Fingerprints) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0f64;
    let mut mu_grad_seen = true;
    for point in 0..20 {
        let g = random_connected_graph(&mut rng, 8, 16).unwrap();
        let n = g.n();
        let x = Matrix::from_vec(n, 2, gaussian(&mut rng, 2 * n));
        let target = Matrix::column(&gaussian(&mut rng, n));
        let mask: Vec<bool> = (0..n).map(|i| i == 0 || rng.random_bool(0.7)).collect();
        let op = if point % 2 == 0 { OperatorKind::Sym } else { OperatorKind::Unnorm };
        let mut model = Model::new(gradcheck_config(op), 2, 1, Readout::Node, rng.random()).unwrap();
        randomize(&mut model, &mut rng).unwrap();
        let input = ModelInput::new(std::sync::Arc::new(g), x).unwrap();
        let lambda = model.predict(&input, &ForwardOptions::default()).unwrap().lambda_max;
        let opts = ForwardOptions { lambda_max: lambda, ..Default::default() };
        let (_, analytic) = model.loss_and_grads(&input, &target, &mask, LossKind::Mse, &opts).unwrap();
        let numeric = finite_differences(&model, &input, &target, &mask, &opts);
        for ((name, a), b) in model.params().names().iter().zip(&analytic).zip(&numeric) {
            let err = a.sub(b).frobenius() / a.frobenius().max(b.frobenius()).max(1e-6);
            worst = worst.max(err);
            if name == "mu.gcn0.weight" && a.max_abs() == 0.0 {
                mu_grad_seen = false;
            }
        }
    }
    outcome(worst <= 1e-4 && mu_grad_seen, format!("20 parameter points on 8-16 node graphs: max relative error {worst:.1e}"))
}

fn c7_stability(_: &mut Fingerprints) -> Outcome {
    let (layers, k, hidden) = (64, 20, 16);
    let input = gen_barbell(23, 4, 7).unwrap().model_input().unwrap();
    let cfg = ModelConfig { layers, k, hidden, stable: true, ..ModelConfig::default() };
    let stable = Model::new(cfg.clone(), 1, 1, Readout::Node, 7).unwrap();
    let mut real = 0f64;
    let mut bounds = Vec::new();
    for l in 0..layers {
        let mut sum = 0.0;
        for kk in 0..=k {
            let w = to_dmatrix(stable.params().get(&format!("stable{l}.w{kk}")).unwrap());
            let skew = &w - w.transpose();
            real = real.max(skew.complex_eigenvalues().iter().map(|z| z.re.abs()).fold(0.0, f64::max));
            let a = skew - DMatrix::identity(hidden, hidden) * cfg.gamma;
            sum += a.singular_values().max();
        }
        bounds.push(1.0 + cfg.eps * sum);
    }
    let norms = stable.predict(&input, &ForwardOptions::default()).unwrap().hidden_norms;
    let finite = norms.iter().all(|v| v.is_finite());
    let within = (0..layers).all(|l| norms[l + 1] <= norms[l] * bounds[l] * (1.0 + 1e-12));
    let stable_growth = norms.iter().fold(0.0, |m: f64, v| m.max(v / norms[0]));

    let plain_cfg = ModelConfig { layers, k, hidden, mu: None, ..ModelConfig::default() };
    let plain = Model::new(plain_cfg, 1, 1, Readout::Node, 7).unwrap();
    let pn = plain.predict(&input, &ForwardOptions::default()).unwrap().hidden_norms;
    let plain_growth = pn[1..].iter().fold(0.0, |m: f64, v| m.max(v / pn[1]));
    let pass = real <= 1e-10 && finite && within && plain_growth >= 10.0 && plain_growth >= 10.0 * stable_growth;
    outcome(
        pass,
        format!("max |Re eig(W-W^T)| {real:.1e}; stable: finite={finite}, per-layer bound held={within}, growth {stable_growth:.1}x; unstabilized growth {plain_growth:.2e}x"),
    )
}

fn train_all(config_json: &str) -> Vec<RunRecord> {
    let config = RunConfig::from_json(config_json).unwrap();
    let data = Dataset::for_config(&config).unwrap();
    config.seeds.iter().map(|&s| train_seed(&config, &data, s, None).unwrap().record).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const BARBELL_MU: &str = r#"{"task": {"task": "barbell", "n": 50},
  "model": {"layers": 2, "K": 9, "hidden": 16, "mu": {"input": "features-and-degree"}},
  "optimizer": {"lr": 0.005}, "epochs": 100, "patience": 100, "seeds": [0, 1, 2, 3],
  "data": {"train": 128, "val": 32, "test": 64, "seed": 1}, "batch_size": 8}"#;

const BARBELL_PLAIN: &str = r#"{"task": {"task": "barbell", "n": 70},
  "model": {"layers": 2, "K": 9, "hidden": 16, "mu": null},
  "optimizer": {"lr": 0.005}, "epochs": 100, "patience": 100, "seeds": [0, 1, 2, 3],
  "data": {"train": 128, "val": 32, "test": 64, "seed": 1}, "batch_size": 8}"#;

const RING: &str = r#"{"task": {"task": "ring-routing", "n": 16},
  "model": {"layers": 2, "K": 4, "hidden": 16},
  "optimizer": {"lr": 0.01}, "epochs": 30, "patience": 30, "seeds": [0, 1, 2],
  "data": {"train": 1024, "val": 64, "test": 128, "seed": 2}, "batch_size": 16, "dump_mu": true}"#;

const SSSP: &str = r#"{"task": {"task": "graph-property", "property": "sssp"},
  "model": {"layers": 2, "K": 5, "hidden": 32},
  "optimizer": {"lr": 0.005}, "epochs": 60, "patience": 60, "seeds": [0, 1],
  "data": {"train": 256, "val": 64, "test": 128, "seed": 3}, "batch_size": 16}"#;

fn sssp_ablation() -> String {
    SSSP.replace(r#""K": 5"#, r#""K": 0"#)
}

/// Test MSE recomputed from raw predictions.
fn direct_mse(config_json: &str, record_model: &Model) -> f64 {
    let config = RunConfig::from_json(config_json).unwrap();
    let data = Dataset::for_config(&config).unwrap();
    let per: Vec<f64> = data
        .test
        .iter()
        .map(|inst| {
            let out = record_model.predict(&inst.model_input().unwrap(), &ForwardOptions::default()).unwrap().output;
            let rows: Vec<usize> = (0..inst.n()).filter(|&i| inst.mask[i]).collect();
            rows.iter().map(|&i| (out[(i, 0)] - inst.y[(i, 0)]).powi(2)).sum::<f64>() / rows.len() as f64
        })
        .collect();
    mean(&per)
}

fn c8_barbell(fp: &mut Fingerprints) -> Outcome {
    let mu_records = train_all(BARBELL_MU);
    let plain_records = train_all(BARBELL_PLAIN);
    let mu_mse: Vec<f64> = mu_records.iter().map(|r| r.test.mse.unwrap()).collect();
    let plain_mse: Vec<f64> = plain_records.iter().map(|r| r.test.mse.unwrap()).collect();

    // Cross-check the reported metric against predictions from a retrained seed-0 model.
    let config = RunConfig::from_json(BARBELL_MU).unwrap();
    let data = Dataset::for_config(&config).unwrap();
    let trained = train_seed(&config, &data, 0, None).unwrap();
    let recomputed = direct_mse(BARBELL_MU, &trained.model);
    let consistent = (recomputed - mu_mse[0]).abs() <= 1e-12 * mu_mse[0].max(1.0);

    fp.runs.push(("barbell mu-chebnet".into(), fingerprint(&mu_records)));
    fp.runs.push(("barbell chebnet".into(), fingerprint(&plain_records)));
    let (m, p) = (mean(&mu_mse), mean(&plain_mse));
    outcome(
        m <= 0.1 && p >= 0.5 && consistent,
        format!("mu-ChebNet N=50 mean test MSE {m:.4} {mu_mse:.4?}; ChebNet N=70 mean {p:.3} {plain_mse:.3?}; recomputed seed-0 MSE {recomputed:.4}"),
    )
}

fn c9_ring(fp: &mut Fingerprints) -> Outcome {
    let records = train_all(RING);
    let acc: Vec<f64> = records.iter().map(|r| r.test.accuracy.unwrap()).collect();
    let mut wins = 0;
    let mut contrast = Vec::new();
    for r in &records {
        let (mut clean, mut noisy) = (Vec::new(), Vec::new());
        for d in &r.mu {
            for (v, role) in d.mu.iter().zip(&d.roles) {
                match role.as_str() {
                    "clean" => clean.push(*v),
                    "noisy" => noisy.push(*v),
                    _ => {}
                }
            }
        }
        let (c, n) = (mean(&clean), mean(&noisy));
        wins += (c > n) as usize;
        contrast.push((c, n));
    }
    fp.runs.push(("ring routing".into(), fingerprint(&records)));
    outcome(
        acc.iter().all(|&a| a > 0.9) && wins >= 2,
        format!("accuracy {acc:.3?}; mean mu (clean, noisy) per seed {contrast:.4?}; clean > noisy in {wins}/3"),
    )
}

fn c10_sssp(fp: &mut Fingerprints) -> Outcome {
    let records = train_all(SSSP);
    let ablation = train_all(&sssp_ablation());
    let trained = mean(&records.iter().map(|r| r.test.log10_mse.unwrap()).collect::<Vec<_>>());
    let untrained = mean(&records.iter().map(|r| r.untrained_test.log10_mse.unwrap()).collect::<Vec<_>>());
    let k0 = mean(&ablation.iter().map(|r| r.test.log10_mse.unwrap()).collect::<Vec<_>>());
    let direct = records.iter().all(|r| (r.test.log10_mse.unwrap() - r.test.mse.unwrap().log10()).abs() < 1e-12);
    fp.runs.push(("sssp".into(), fingerprint(&records)));
    fp.runs.push(("sssp K=0".into(), fingerprint(&ablation)));
    outcome(
        trained <= untrained - 1.0 && trained < k0 && direct,
        format!("test log10(MSE): trained {trained:.3}, untrained {untrained:.3}, K=0 ablation {k0:.3}"),
    )
}

fn c11_determinism(fp: &mut Fingerprints) -> Outcome {
    if fp.runs.len() < 5 {
        return outcome(false, "criteria 8-10 did not all complete");
    }
    let mut again = Fingerprints::default();
    c8_barbell(&mut again);
    c9_ring(&mut again);
    c10_sssp(&mut again);
    let same: Vec<String> = fp
        .runs
        .iter()
        .zip(&again.runs)
        .map(|((name, a), (_, b))| format!("{name}: {}", if a == b { "identical" } else { "DIFFERENT" }))
        .collect();
    let pass = fp.runs.len() == again.runs.len() && fp.runs.iter().zip(&again.runs).all(|(a, b)| a.1 == b.1);
    outcome(pass, same.join(", "))
}

type Criterion = (&'static str, Duration, fn(&mut Fingerprints) -> Outcome);

fn main() {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria: [Criterion; 11] = [
        ("1 exact algebra", Duration::from_secs(10), c1_algebra),
        ("2 four-ring showcase", Duration::from_secs(1), c2_showcase),
        ("3 Rayleigh factorization", Duration::from_secs(5), c3_lemma),
        ("4 star corollaries", Duration::from_secs(10), c4_corollaries),
        ("5 Chebyshev oracle", Duration::from_secs(30), c5_chebyshev),
        ("6 gradient check", Duration::from_secs(60), c6_gradcheck),
        ("7 stable variant", minutes(2), c7_stability),
        ("8 barbell training", minutes(15), c8_barbell),
        ("9 ring routing", minutes(10), c9_ring),
        ("10 SSSP sanity", minutes(15), c10_sssp),
        ("11 determinism", minutes(40), c11_determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut fp = Fingerprints::default();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.split(' ').next() == Some(o.as_str())) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut fp)));
        let elapsed = started.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("panicked: {}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
        };
        failed += !pass as usize;
        println!(
            "[{}] criterion {name} ({:.1}s of {}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
