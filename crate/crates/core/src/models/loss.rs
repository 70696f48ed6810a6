use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

fn check_target(op: &'static str, pred: (usize, usize), target: &Matrix, mask: &[bool]) -> Result<usize> {
    if pred != target.shape() {
        return Err(Error::ShapeMismatch { op, detail: format!("pred {:?} vs target {:?}", pred, target.shape()) });
    }
    if mask.len() != pred.0 {
        return Err(Error::LengthMismatch { expected: pred.0, got: mask.len() });
    }
    match mask.iter().filter(|&&m| m).count() {
        0 => Err(Error::EmptyMask),
        k => Ok(k),
    }
}

fn mask_column(mask: &[bool]) -> Matrix {
    Matrix::column(&mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect::<Vec<_>>())
}

/// Mean squared error over the selected rows and every column.
pub fn mse(tape: &mut Tape, pred: Var, target: &Matrix, mask: &[bool]) -> Result<Var> {
    let rows = check_target("mse", tape.shape(pred), target, mask)?;
    let t = tape.constant(target.clone());
    let diff = tape.sub(pred, t)?;
    let m = tape.constant(mask_column(mask));
    let diff = tape.row_scale(diff, m)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / (rows * target.cols()) as f64))
}

/// Mean negative log-likelihood of one-hot `target` rows under softmax logits.
pub fn cross_entropy(tape: &mut Tape, logits: Var, target: &Matrix, mask: &[bool]) -> Result<Var> {
    let rows = check_target("cross_entropy", tape.shape(logits), target, mask)?;
    let logp = tape.log_softmax_rows(logits);
    let t = tape.constant(target.clone());
    let picked = tape.mul(logp, t)?;
    let m = tape.constant(mask_column(mask));
    let picked = tape.row_scale(picked, m)?;
    let total = tape.sum(picked);
    Ok(tape.scale(total, -1.0 / rows as f64))
}

pub fn loss(tape: &mut Tape, kind: LossKind, pred: Var, target: &Matrix, mask: &[bool]) -> Result<Var> {
    match kind {
        LossKind::Mse => mse(tape, pred, target, mask),
        LossKind::CrossEntropy => cross_entropy(tape, pred, target, mask),
    }
}

/// `log₁₀` of an MSE, for reporting only.
pub fn log10_mse(mse: f64) -> f64 {
    mse.log10()
}

/// Fraction of selected rows whose arg-max matches the one-hot target.
pub fn accuracy(logits: &Matrix, target: &Matrix, mask: &[bool]) -> Result<f64> {
    let rows = check_target("accuracy", logits.shape(), target, mask)?;
    let argmax = |r: &[f64]| {
        r.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
    };
    let hits = (0..logits.rows()).filter(|&i| mask[i] && argmax(logits.row(i)) == argmax(target.row(i))).count();
    Ok(hits as f64 / rows as f64)
}
