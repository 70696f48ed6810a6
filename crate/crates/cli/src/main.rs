use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bespectral::be::{BeOperator, HeatScheme, Normalization, Potential};
use bespectral::chebyshev::{cheb_apply, estimate_lambda_max, ChebFilter};
use bespectral::experiment::io::{self, read_checkpoint, read_instances, write_json};
use bespectral::experiment::{self, evaluate, generate_split, summarize, Dataset, RunConfig};
use bespectral::spectral::eig_sym;
use bespectral::tasks::{Property, RandomGraph, TaskInstance, TaskSpec};
use bespectral::verify::{run_suite, Suite, VerifyOptions};
use bespectral::{Graph, Matrix};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "be-spectral", version, about = "Bakry-Emery spectral tools and mu-ChebNet experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed override (data generation, or the single training seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate task instances as per-instance directories.
    Gen(GenArgs),
    /// Train every configured seed and write records, checkpoints and a summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint on instance directories.
    Eval(EvalArgs),
    /// Eigenvalues of L or L_mu as "k,lambda" rows.
    Spectrum(SpectrumArgs),
    /// Heat flow df/dt = -L_mu f.
    Diffuse(DiffuseArgs),
    /// Apply a Chebyshev filter of L_mu to a signal matrix.
    Filter(FilterArgs),
    /// Run invariant suites and write report.json.
    Verify(VerifyArgs),
    /// Write the learned potential of a checkpoint on one instance.
    ExportMu(ExportMuArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskName {
    Barbell,
    RingRouting,
    Sssp,
    Diameter,
    Eccentricity,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    task: Option<TaskName>,
    /// Total node count (barbell, ring routing).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 4)]
    k_path: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    parallel_seeds: usize,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// An instance directory or a directory of them.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Sym,
    Rw,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Potential, one value per line; defaults to mu = 1.
    #[arg(long)]
    mu: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    g: GraphArgs,
    #[arg(long, value_enum)]
    normalized: Option<NormArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Spectral,
    Euler,
    Rk4,
}

#[derive(Args)]
struct DiffuseArgs {
    #[command(flatten)]
    g: GraphArgs,
    #[arg(long)]
    t: f64,
    /// Initial signal; defaults to a unit spike at --source.
    #[arg(long)]
    f0: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    source: usize,
    #[arg(long, value_enum, default_value = "spectral")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    g: GraphArgs,
    /// K+1 coefficients, one per line.
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "X")]
    x: PathBuf,
    /// Spectral bound; estimated by power iteration when omitted.
    #[arg(long)]
    lambda_max: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or "all".
    #[arg(long, default_value = "all")]
    suite: String,
    /// Star sizes for the corollary suite.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
}

#[derive(Args)]
struct ExportMuArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    instance: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => gen(g, a)?,
        Command::Train(a) => train(g, a)?,
        Command::Eval(a) => eval(g, a)?,
        Command::Spectrum(a) => spectrum(g, a)?,
        Command::Diffuse(a) => diffuse(g, a)?,
        Command::Filter(a) => filter(g, a)?,
        Command::Verify(a) => return verify(g, a),
        Command::ExportMu(a) => export_mu(g, a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn require_out(g: &Global) -> Result<&Path> {
    g.out.as_deref().context("--out is required")
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let path = g.config.as_deref().context("--config is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunConfig::from_json(&text)?)
}

/// Writes CSV text to `--out`, or stdout without one.
fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn task_spec(a: &GenArgs) -> Result<TaskSpec> {
    let property = |property| TaskSpec::GraphProperty { property, n_min: 15, n_max: 25, generator: RandomGraph::default() };
    Ok(match a.task.context("--task or --config is required")? {
        TaskName::Barbell => TaskSpec::Barbell { n: a.n.unwrap_or(50), k_path: a.k_path, feature_std: None },
        TaskName::RingRouting => TaskSpec::RingRouting { n: a.n.unwrap_or(16), classes: 10, noise: 1.0 },
        TaskName::Sssp => property(Property::Sssp),
        TaskName::Diameter => property(Property::Diameter),
        TaskName::Eccentricity => property(Property::Eccentricity),
    })
}

fn gen(g: &Global, a: &GenArgs) -> Result<()> {
    let out = require_out(g)?;
    if a.task.is_none() && g.config.is_some() {
        let mut config = load_config(g)?;
        if let Some(seed) = g.seed {
            config.data.seed = seed;
        }
        let data = Dataset::generate(&config.task, &config.data)?;
        io::write_dataset(out, &data)?;
        println!("wrote {}/{}/{} train/val/test instances to {}", data.train.len(), data.val.len(), data.test.len(), out.display());
        return Ok(());
    }
    let instances = generate_split(&task_spec(a)?, g.seed.unwrap_or(0), 0, a.count)?;
    for (i, inst) in instances.iter().enumerate() {
        io::write_instance(&out.join(format!("{i:05}")), inst)?;
    }
    println!("wrote {} instances to {}", instances.len(), out.display());
    Ok(())
}

fn train(g: &Global, a: &TrainArgs) -> Result<()> {
    let mut config = load_config(g)?;
    if let Some(seed) = g.seed {
        config.seeds = vec![seed];
    }
    if let Some(epochs) = a.epochs {
        config.epochs = epochs;
    }
    config.validate()?;
    let data = Dataset::for_config(&config)?;
    let parallel = a.parallel_seeds.min(experiment::worker_threads()).max(1);
    let runs = experiment::run(&config, &data, g.out.as_deref(), parallel)?;
    let records: Vec<_> = runs.into_iter().map(|r| r.record).collect();
    for r in &records {
        let log = r.test.log10_mse.map(|v| format!(", log10 {v:.4}")).unwrap_or_default();
        println!("seed {}: test {:.6}{log} (best epoch {}, {:.1}s)", r.seed, r.test.headline(), r.best_epoch, r.wall_seconds);
    }
    let s = summarize(&config, &records);
    let log = s.mean_log10_mse.map(|v| format!(", mean log10 {v:.4}")).unwrap_or_default();
    println!("{} {}: {:.4} ± {:.4} over {} seeds{log}", s.task, s.metric, s.mean, s.std, s.seeds);
    Ok(())
}

fn eval(g: &Global, a: &EvalArgs) -> Result<()> {
    let model = read_checkpoint(&a.checkpoint)?;
    let instances = read_instances(&a.data)?;
    let kind = instances.first().context("no instances found")?.meta.loss;
    let metrics = evaluate(&model, &instances, kind)?;
    let report = json!({ "instances": instances.len(), "metrics": metrics });
    match &g.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn load_graph(a: &GraphArgs) -> Result<(Graph, Potential)> {
    let graph = Graph::read_edge_list(&a.graph, None).with_context(|| format!("reading {}", a.graph.display()))?;
    let mu = match &a.mu {
        Some(p) => Potential::new(io::read_vector_csv(p)?)?,
        None => Potential::constant(graph.n(), 1.0)?,
    };
    Ok((graph, mu))
}

fn spectrum(g: &Global, a: &SpectrumArgs) -> Result<()> {
    let (graph, mu) = load_graph(&a.g)?;
    let be = BeOperator::new(&graph, mu)?;
    // The random-walk form is similar to the symmetric one.
    let op = match a.normalized {
        None => be.laplacian(),
        Some(_) => be.normalized(Normalization::Symmetric)?,
    };
    let mut text = String::from("k,lambda\n");
    for (k, l) in eig_sym(&op)?.eigenvalues.iter().enumerate() {
        text.push_str(&format!("{k},{l}\n"));
    }
    emit(g, &text)
}

fn diffuse(g: &Global, a: &DiffuseArgs) -> Result<()> {
    let (graph, mu) = load_graph(&a.g)?;
    let f0 = match &a.f0 {
        Some(p) => io::read_vector_csv(p)?,
        None => {
            if a.source >= graph.n() {
                bail!("--source {} out of range for {} nodes", a.source, graph.n());
            }
            let mut f = vec![0.0; graph.n()];
            f[a.source] = 1.0;
            f
        }
    };
    let scheme = match a.scheme {
        SchemeArg::Spectral => HeatScheme::Spectral,
        SchemeArg::Euler => HeatScheme::Euler { dt: a.dt },
        SchemeArg::Rk4 => HeatScheme::Rk4 { dt: a.dt },
    };
    let f = BeOperator::new(&graph, mu)?.heat_flow(&f0, a.t, scheme)?;
    emit(g, &io::matrix_to_csv(&Matrix::column(&f)))
}

fn filter(g: &Global, a: &FilterArgs) -> Result<()> {
    let (graph, mu) = load_graph(&a.g)?;
    let coeffs = io::read_vector_csv(&a.coeffs)?;
    if coeffs.len() != a.k + 1 {
        bail!("--K {} needs {} coefficients, {} has {}", a.k, a.k + 1, a.coeffs.display(), coeffs.len());
    }
    let x = io::read_matrix_csv(&a.x)?;
    let op = BeOperator::new(&graph, mu)?.laplacian();
    let lambda_max = match a.lambda_max {
        Some(l) => l,
        None => estimate_lambda_max(&op)?,
    };
    let y = cheb_apply(&ChebFilter::scalar(lambda_max, &coeffs, x.cols())?, &op, &x)?;
    emit(g, &io::matrix_to_csv(&y))
}

fn verify(g: &Global, a: &VerifyArgs) -> Result<ExitCode> {
    let suites: Vec<Suite> = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse()?] };
    let mut opts = VerifyOptions { seed: g.seed.unwrap_or(0), ..VerifyOptions::default() };
    if let Some(n) = &a.n {
        opts.star_sizes = n.clone();
    }
    let mut reports = Vec::new();
    for suite in suites {
        let r = run_suite(suite, &opts)?;
        println!("{} {} ({:.2}s)", if r.passed { "PASS" } else { "FAIL" }, suite.name(), r.seconds);
        for c in &r.checks {
            let tag = match (c.asserted, c.passed) {
                (false, _) => "info",
                (true, true) => "ok",
                (true, false) => "FAILED",
            };
            println!("  {tag:6} {} = {:.3e} (threshold {:.3e})", c.name, c.value, c.threshold);
        }
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    write_json(&out, &json!({ "passed": passed, "suites": reports }))?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn role_means(inst: &TaskInstance, mu: &[f64]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (role, v) in inst.meta.roles.iter().zip(mu) {
        let e = sums.entry(role.clone()).or_default();
        e.0 += v;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

fn export_mu(g: &Global, a: &ExportMuArgs) -> Result<()> {
    let out = require_out(g)?;
    let model = read_checkpoint(&a.checkpoint)?;
    let inst = io::read_instance(&a.instance)?;
    if inst.x.cols() != model.in_dim() {
        return Err(bespectral::Error::ShapeMismatch {
            op: "export-mu",
            detail: format!("checkpoint expects {} features, instance has {}", model.in_dim(), inst.x.cols()),
        }
        .into());
    }
    let mu = model.potential(&inst.model_input()?)?.context("checkpoint has no potential head")?;
    std::fs::create_dir_all(out)?;
    io::write_vector_csv(&out.join("mu.csv"), &mu)?;
    let means = role_means(&inst, &mu);
    let contrast = |hi: &str, lo: &[&str]| -> Option<f64> {
        let lows: Vec<f64> = lo.iter().filter_map(|r| means.get(*r).copied()).collect();
        Some(means.get(hi)? - lows.iter().sum::<f64>() / (!lows.is_empty()).then_some(lows.len() as f64)?)
    };
    let manifest = json!({
        "task": inst.meta.task,
        "nodes": inst.n(),
        "order": "row i of mu.csv is node i of graph.edges",
        "roles": inst.meta.roles,
        "role_means": means,
        "path_contrast": contrast("clean", &["noisy"]),
        "bridge_contrast": contrast("bridge", &["bell-a", "bell-b"]),
        "mu_min": mu.iter().copied().fold(f64::INFINITY, f64::min),
        "mu_max": mu.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} mu values to {}", mu.len(), out.display());
    Ok(())
}
