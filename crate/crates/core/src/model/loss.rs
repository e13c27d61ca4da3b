//! Training losses on a probability vector `p` against a 0/1 target `m`.
//! Each comes with its analytic gradient so the combination can be recorded
//! on a tape as a single node.

use crate::data::DdiMatrix;
use crate::numerics::{Tape, Tensor, TensorError, Var};

const CLIP: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LossError {
    #[error("prediction has {pred} entries, target has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
}

fn check(pred: &[f64], other: usize) -> Result<(), LossError> {
    if pred.len() != other {
        return Err(LossError::LengthMismatch {
            pred: pred.len(),
            truth: other,
        });
    }
    Ok(())
}

fn bce_parts(pred: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p, &m)) in pred.iter().zip(truth).enumerate() {
        let c = p.clamp(CLIP, 1.0 - CLIP);
        loss -= m * c.ln() + (1.0 - m) * (1.0 - c).ln();
        if c == p {
            grad[i] = -m / c + (1.0 - m) / (1.0 - c);
        }
    }
    (loss, grad)
}

fn margin_parts(pred: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, &pi) in pred.iter().enumerate() {
        if truth[i] != 1.0 {
            continue;
        }
        for (j, &pj) in pred.iter().enumerate() {
            if truth[j] != 0.0 {
                continue;
            }
            let slack = 1.0 - (pi - pj);
            if slack > 0.0 {
                loss += slack;
                grad[i] -= 1.0 / n;
                grad[j] += 1.0 / n;
            }
        }
    }
    (loss / n, grad)
}

fn ddi_parts(pred: &[f64], ddi: &DdiMatrix) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, j) in ddi.edges() {
        // both orientations of the symmetric matrix
        loss += 2.0 * pred[i] * pred[j];
        grad[i] += 2.0 * pred[j];
        grad[j] += 2.0 * pred[i];
    }
    (loss, grad)
}

/// `-sum m log p + (1 - m) log(1 - p)` with `p` clipped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(pred: &[f64], truth: &[f64]) -> Result<f64, LossError> {
    check(pred, truth.len())?;
    Ok(bce_parts(pred, truth).0)
}

/// `sum_{m_i = 1, m_j = 0} max(0, 1 - (p_i - p_j)) / |M|`.
pub fn margin_loss(pred: &[f64], truth: &[f64]) -> Result<f64, LossError> {
    check(pred, truth.len())?;
    Ok(margin_parts(pred, truth).0)
}

/// `sum_i sum_j a_ij p_i p_j` over the symmetric interaction matrix.
pub fn ddi_loss(pred: &[f64], ddi: &DdiMatrix) -> Result<f64, LossError> {
    check(pred, ddi.size())?;
    Ok(ddi_parts(pred, ddi).0)
}

/// `beta (gamma bce + (1 - gamma) margin) + (1 - beta) ddi`.
pub fn combined_loss(
    pred: &[f64],
    truth: &[f64],
    ddi: &DdiMatrix,
    beta: f64,
    gamma: f64,
) -> Result<f64, LossError> {
    let b = bce_loss(pred, truth)?;
    let m = margin_loss(pred, truth)?;
    let d = ddi_loss(pred, ddi)?;
    Ok(beta * (gamma * b + (1.0 - gamma) * m) + (1.0 - beta) * d)
}

/// [`combined_loss`] of the `[1 x |M|]` probabilities `pred` as a tape node.
pub fn combined_loss_var(
    tape: &mut Tape,
    pred: Var,
    truth: &[f64],
    ddi: &DdiMatrix,
    beta: f64,
    gamma: f64,
) -> Result<Var, TensorError> {
    let p = tape.value(pred).data().to_vec();
    if p.len() != truth.len() || p.len() != ddi.size() {
        return Err(TensorError::ShapeMismatch {
            op: "combined_loss",
            left: tape.value(pred).shape().to_vec(),
            right: vec![1, truth.len()],
        });
    }
    let (b, gb) = bce_parts(&p, truth);
    let (m, gm) = margin_parts(&p, truth);
    let (d, gd) = ddi_parts(&p, ddi);
    let value = beta * (gamma * b + (1.0 - gamma) * m) + (1.0 - beta) * d;
    let grad = (0..p.len())
        .map(|i| beta * (gamma * gb[i] + (1.0 - gamma) * gm[i]) + (1.0 - beta) * gd[i])
        .collect();
    tape.scalar_fn(pred, value, Tensor::row(grad))
}
