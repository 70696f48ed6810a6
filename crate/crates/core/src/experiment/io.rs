//! File formats: CSV signals, checkpoints (JSON manifest plus raw
//! little-endian `f64` blobs) and per-instance dataset directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, RunRecord, Summary};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::models::{Model, ModelConfig, Readout};
use crate::tasks::{InstanceMeta, TaskInstance};

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Comma-separated rows. Values use Rust's shortest round-trip formatting.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses comma- or whitespace-separated rows; `#` starts a comment line.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number {t:?}", lineno + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("line {}: {} columns, expected {}", lineno + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

/// A single column of values, one per line.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    if m.cols() > 1 {
        return Err(Error::Parse(format!("{}: expected one column, found {}", path.display(), m.cols())));
    }
    Ok(m.into_vec())
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    write_matrix_csv(path, &Matrix::column(v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub model: ModelConfig,
    pub in_dim: usize,
    pub out_dim: usize,
    pub readout: Readout,
    pub tensors: Vec<TensorEntry>,
}

const CHECKPOINT_FORMAT: &str = "be-spectral-checkpoint-v1";

pub fn write_checkpoint(dir: &Path, model: &Model) -> Result<()> {
    fs::create_dir_all(dir)?;
    let params = model.params();
    let mut tensors = Vec::with_capacity(params.len());
    for (i, (name, value)) in params.names().iter().zip(params.values()).enumerate() {
        let file = format!("{i:03}.f64");
        let bytes: Vec<u8> = value.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(dir.join(&file), bytes)?;
        tensors.push(TensorEntry { name: name.clone(), rows: value.rows(), cols: value.cols(), file });
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        model: model.config().clone(),
        in_dim: model.in_dim(),
        out_dim: model.out_dim(),
        readout: model.readout(),
        tensors,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn read_checkpoint(dir: &Path) -> Result<Model> {
    let manifest: CheckpointManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Parse(format!("unknown checkpoint format {:?}", manifest.format)));
    }
    let mut model = Model::new(manifest.model, manifest.in_dim, manifest.out_dim, manifest.readout, 0)?;
    let names = model.params().names().to_vec();
    if names.len() != manifest.tensors.len() {
        return Err(Error::LengthMismatch { expected: names.len(), got: manifest.tensors.len() });
    }
    let mut values = Vec::with_capacity(names.len());
    for (name, entry) in names.iter().zip(&manifest.tensors) {
        if *name != entry.name {
            return Err(Error::Parse(format!("checkpoint tensor {:?} where {:?} was expected", entry.name, name)));
        }
        let bytes = fs::read(dir.join(&entry.file))?;
        if bytes.len() != entry.rows * entry.cols * 8 {
            return Err(Error::Parse(format!("{}: {} bytes for a {}x{} tensor", entry.file, bytes.len(), entry.rows, entry.cols)));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        values.push(Matrix::from_vec(entry.rows, entry.cols, data));
    }
    model.params_mut().set_values(values)?;
    Ok(model)
}

pub fn write_instance(dir: &Path, inst: &TaskInstance) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("graph.edges"), inst.graph.to_edge_list())?;
    write_matrix_csv(&dir.join("x.csv"), &inst.x)?;
    write_matrix_csv(&dir.join("y.csv"), &inst.y)?;
    let mask: Vec<f64> = inst.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    write_vector_csv(&dir.join("mask.csv"), &mask)?;
    write_json(&dir.join("meta.json"), &inst.meta)
}

pub fn read_instance(dir: &Path) -> Result<TaskInstance> {
    let missing = |what: &str| Error::DatasetMissing(format!("{}: {what}", dir.display()));
    if !dir.join("graph.edges").exists() {
        return Err(missing("graph.edges not found"));
    }
    let graph = Graph::read_edge_list(&dir.join("graph.edges"), None)?;
    let meta: InstanceMeta = read_json(&dir.join("meta.json"))?;
    let x = read_matrix_csv(&dir.join("x.csv"))?;
    let y = read_matrix_csv(&dir.join("y.csv"))?;
    let mask: Vec<bool> = read_vector_csv(&dir.join("mask.csv"))?.into_iter().map(|v| v != 0.0).collect();
    if x.rows() != graph.n() || mask.len() != y.rows() {
        return Err(missing("feature, target and mask shapes disagree with the graph"));
    }
    Ok(TaskInstance { graph: Arc::new(graph), x, y, mask, meta })
}

fn split_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    Ok(entries)
}

/// `dir/{train,val,test}/NNNNN/` instance directories.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    for (name, split) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
        for (i, inst) in split.iter().enumerate() {
            write_instance(&dir.join(name).join(format!("{i:05}")), inst)?;
        }
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::DatasetMissing(dir.display().to_string()));
    }
    let read_split = |name: &str| -> Result<Vec<TaskInstance>> {
        let d = dir.join(name);
        if !d.is_dir() {
            return Ok(Vec::new());
        }
        split_dirs(&d)?.iter().map(|p| read_instance(p)).collect()
    };
    let data = Dataset { train: read_split("train")?, val: read_split("val")?, test: read_split("test")? };
    if data.val.is_empty() || data.test.is_empty() {
        return Err(Error::DatasetMissing(format!("{}: val and test splits are required", dir.display())));
    }
    Ok(data)
}

/// A single instance directory or a flat directory of them.
pub fn read_instances(dir: &Path) -> Result<Vec<TaskInstance>> {
    if dir.join("graph.edges").exists() {
        return Ok(vec![read_instance(dir)?]);
    }
    split_dirs(dir)?.iter().map(|p| read_instance(p)).collect()
}

pub fn write_summary_csv(path: &Path, summary: &Summary, records: &[RunRecord]) -> Result<()> {
    let mut out = String::from("task,seed,metric,value,log10_mse,best_epoch,epochs_run\n");
    for r in records {
        let log = r.test.log10_mse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            summary.task,
            r.seed,
            summary.metric,
            r.test.headline(),
            log,
            r.best_epoch,
            r.epochs_run
        ));
    }
    let log = summary.mean_log10_mse.map(|v| v.to_string()).unwrap_or_default();
    out.push_str(&format!("{},mean,{},{},{},,\n", summary.task, summary.metric, summary.mean, log));
    out.push_str(&format!("{},std,{},{},,,\n", summary.task, summary.metric, summary.std));
    fs::write(path, out)?;
    Ok(())
}
