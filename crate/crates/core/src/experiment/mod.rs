//! Training runs: configs, Adam with early stopping, metrics, records and
//! on-disk artifacts (checkpoints, dataset dumps, JSON-lines metrics).

pub mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{loss, ForwardOptions, LossKind, Model, ModelConfig, ModelInput};
use crate::tasks::{TaskInstance, TaskSpec};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BE_SPECTRAL_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    /// Load a dumped dataset instead of generating one.
    pub dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { train: 512, val: 64, test: 128, seed: 0, dir: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Store the learned potential of every test graph in the record.
    #[serde(default)]
    pub dump_mu: bool,
}

fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    50
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_batch() -> usize {
    16
}
fn default_eval_every() -> usize {
    1
}

impl RunConfig {
    pub fn new(task: TaskSpec, model: ModelConfig) -> Self {
        Self {
            task,
            model,
            optimizer: AdamConfig::default(),
            epochs: default_epochs(),
            patience: default_patience(),
            seeds: default_seeds(),
            data: DataConfig::default(),
            batch_size: default_batch(),
            eval_every: default_eval_every(),
            dump_mu: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch_size and eval_every must be positive");
        }
        if self.data.dir.is_none() && (self.data.val == 0 || self.data.test == 0) {
            return bad("val and test splits must be nonempty");
        }
        if self.epochs > 0 && self.data.dir.is_none() && self.data.train == 0 {
            return bad("training requires a nonempty train split");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configs serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<TaskInstance>,
    pub val: Vec<TaskInstance>,
    pub test: Vec<TaskInstance>,
}

/// Seed of instance `index` in split `split` (0 train, 1 val, 2 test).
pub fn instance_seed(data_seed: u64, split: u64, index: u64) -> u64 {
    let mut z = data_seed ^ split.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_split(task: &TaskSpec, data_seed: u64, split: u64, count: usize) -> Result<Vec<TaskInstance>> {
    (0..count).map(|i| task.generate(instance_seed(data_seed, split, i as u64))).collect()
}

impl Dataset {
    pub fn generate(task: &TaskSpec, data: &DataConfig) -> Result<Self> {
        Ok(Self {
            train: generate_split(task, data.seed, 0, data.train)?,
            val: generate_split(task, data.seed, 1, data.val)?,
            test: generate_split(task, data.seed, 2, data.test)?,
        })
    }

    /// Generated or loaded per `config.data`.
    pub fn for_config(config: &RunConfig) -> Result<Self> {
        match &config.data.dir {
            Some(dir) => io::read_dataset(dir),
            None => Self::generate(&config.task, &config.data),
        }
    }
}

/// Evaluation summary over a set of instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean training objective.
    pub loss: f64,
    pub mse: Option<f64>,
    pub log10_mse: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    /// The headline number: MSE for regression, accuracy for classification.
    pub fn headline(&self) -> f64 {
        self.mse.or(self.accuracy).unwrap_or(self.loss)
    }
}

struct Prepared<'a> {
    inst: &'a TaskInstance,
    input: ModelInput,
}

fn prepare(instances: &[TaskInstance]) -> Result<Vec<Prepared<'_>>> {
    instances.iter().map(|inst| Ok(Prepared { inst, input: inst.model_input()? })).collect()
}

fn evaluate_prepared(model: &Model, data: &[Prepared<'_>], kind: LossKind) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::DatasetMissing("cannot evaluate an empty split".into()));
    }
    let opts = ForwardOptions::default();
    let (mut total, mut hits) = (0.0, 0.0);
    for p in data {
        let pred = model.predict(&p.input, &opts)?;
        let mut tape = crate::autodiff::Tape::new();
        let out = tape.constant(pred.output.clone());
        let l = loss::loss(&mut tape, kind, out, &p.inst.y, &p.inst.mask)?;
        total += tape.value(l)[(0, 0)];
        if kind == LossKind::CrossEntropy {
            hits += loss::accuracy(&pred.output, &p.inst.y, &p.inst.mask)?;
        }
    }
    let count = data.len() as f64;
    let mean = total / count;
    Ok(match kind {
        LossKind::Mse => Metrics { loss: mean, mse: Some(mean), log10_mse: Some(loss::log10_mse(mean)), accuracy: None },
        LossKind::CrossEntropy => Metrics { loss: mean, mse: None, log10_mse: None, accuracy: Some(hits / count) },
    })
}

/// Mean metrics of `model` over `instances`.
pub fn evaluate(model: &Model, instances: &[TaskInstance], kind: LossKind) -> Result<Metrics> {
    evaluate_prepared(model, &prepare(instances)?, kind)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuDump {
    pub instance: usize,
    pub mu: Vec<f64>,
    pub roles: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub untrained_test: Metrics,
    pub test: Metrics,
    pub wall_seconds: f64,
    pub checkpoint: Option<PathBuf>,
    pub mu: Vec<MuDump>,
}

/// Everything a finished seed leaves behind.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub record: RunRecord,
    pub model: Model,
}

/// Trains one seed. Metrics stream to `metrics` as JSON lines when given.
pub fn train_seed(config: &RunConfig, data: &Dataset, seed: u64, mut metrics: Option<&mut dyn std::io::Write>) -> Result<TrainedRun> {
    config.validate()?;
    let started = Instant::now();
    let (in_dim, out_dim) = data
        .test
        .first()
        .map(|t| (t.x.cols(), t.y.cols()))
        .ok_or_else(|| Error::DatasetMissing("test split is empty".into()))?;
    let kind = config.task.loss();
    let mut model = Model::new(config.model.clone(), in_dim, out_dim, config.task.readout(), seed)?;
    let train = prepare(&data.train)?;
    let val = prepare(&data.val)?;
    let test = prepare(&data.test)?;
    let untrained_test = evaluate_prepared(&model, &test, kind)?;

    let mut adam = Adam::new(config.optimizer, model.params().shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_0DE5);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, Vec<Matrix>)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;
    let opts = ForwardOptions::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut acc: Option<Vec<Matrix>> = None;
            for &i in batch {
                let p = &train[i];
                let (value, grads) = model.loss_and_grads(&p.input, &p.inst.y, &p.inst.mask, kind, &opts)?;
                if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NaNLoss { epoch, detail: format!("instance {i} (seed {})", p.inst.meta.seed) });
                }
                epoch_loss += value;
                match &mut acc {
                    None => acc = Some(grads),
                    Some(sum) => sum.iter_mut().zip(&grads).for_each(|(s, g)| s.add_assign(g)),
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<Matrix> = acc.expect("nonempty batch").into_iter().map(|g| g.scale(scale)).collect();
            adam.step(model.params_mut().values_mut(), &grads);
        }
        let train_loss = epoch_loss / train.len() as f64;
        let evaluate_now = epoch % config.eval_every == 0 || epoch == config.epochs;
        let val_metrics = if evaluate_now { Some(evaluate_prepared(&model, &val, kind)?) } else { None };
        let rec = EpochRecord { epoch, train_loss, val: val_metrics.clone() };
        if let Some(w) = metrics.as_deref_mut() {
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        history.push(rec);
        if let Some(v) = val_metrics {
            if !v.loss.is_finite() {
                return Err(Error::NaNLoss { epoch, detail: "validation loss".into() });
            }
            if best.as_ref().is_none_or(|(b, _, _)| v.loss < *b) {
                best = Some((v.loss, epoch, model.params().values().to_vec()));
                since_best = 0;
            } else {
                since_best += config.eval_every;
                if config.patience > 0 && since_best >= config.patience {
                    break;
                }
            }
        }
    }
    let epochs_run = history.len();
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params_mut().set_values(params)?;
            epoch
        }
        None => 0,
    };
    let test_metrics = evaluate_prepared(&model, &test, kind)?;
    let mut mu = Vec::new();
    if config.dump_mu {
        for (i, p) in test.iter().enumerate() {
            if let Some(values) = model.potential(&p.input)? {
                mu.push(MuDump { instance: i, mu: values, roles: p.inst.meta.roles.clone() });
            }
        }
    }
    let record = RunRecord {
        config_hash: config.hash(),
        seed,
        epochs_run,
        best_epoch,
        history,
        untrained_test,
        test: test_metrics,
        wall_seconds: started.elapsed().as_secs_f64(),
        checkpoint: None,
        mu,
    };
    Ok(TrainedRun { record, model })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub metric: String,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_log10_mse: Option<f64>,
}

/// Mean and population standard deviation of each seed's headline metric.
pub fn summarize(config: &RunConfig, records: &[RunRecord]) -> Summary {
    let vals: Vec<f64> = records.iter().map(|r| r.test.headline()).collect();
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let logs: Option<Vec<f64>> = records.iter().map(|r| r.test.log10_mse).collect();
    Summary {
        task: config.task.name(),
        metric: if config.task.loss() == LossKind::Mse { "mse" } else { "accuracy" }.into(),
        seeds: records.len(),
        mean,
        std,
        mean_log10_mse: logs.map(|l| l.iter().sum::<f64>() / n),
    }
}

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Trains every configured seed, `parallel` of them at a time, each writing
/// into its own `seed-<s>` directory under `out` when given.
pub fn run(config: &RunConfig, data: &Dataset, out: Option<&Path>, parallel: usize) -> Result<Vec<TrainedRun>> {
    config.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        io::write_json(&dir.join("config.json"), config)?;
    }
    let one = |seed: u64| -> Result<TrainedRun> {
        match out {
            None => train_seed(config, data, seed, None),
            Some(dir) => {
                let seed_dir = dir.join(format!("seed-{seed}"));
                std::fs::create_dir_all(&seed_dir)?;
                let mut file = std::io::BufWriter::new(std::fs::File::create(seed_dir.join("metrics.jsonl"))?);
                let mut run = train_seed(config, data, seed, Some(&mut file))?;
                std::io::Write::flush(&mut file)?;
                let ckpt = seed_dir.join("checkpoint");
                io::write_checkpoint(&ckpt, &run.model)?;
                run.record.checkpoint = Some(ckpt);
                io::write_json(&seed_dir.join("record.json"), &run.record)?;
                Ok(run)
            }
        }
    };
    let parallel = parallel.max(1);
    let mut results: Vec<Option<Result<TrainedRun>>> = (0..config.seeds.len()).map(|_| None).collect();
    for chunk in (0..config.seeds.len()).collect::<Vec<_>>().chunks(parallel) {
        if chunk.len() == 1 {
            results[chunk[0]] = Some(one(config.seeds[chunk[0]]));
            continue;
        }
        let outs: Vec<(usize, Result<TrainedRun>)> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&i| (i, s.spawn(move || one(config.seeds[i])))).collect();
            handles.into_iter().map(|(i, h)| (i, h.join().expect("training thread panicked"))).collect()
        });
        for (i, r) in outs {
            results[i] = Some(r);
        }
    }
    let runs = results.into_iter().map(|r| r.expect("every seed ran")).collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();
        io::write_summary_csv(&dir.join("summary.csv"), &summarize(config, &records), &records)?;
    }
    Ok(runs)
}

#[cfg(test)]
mod tests;
