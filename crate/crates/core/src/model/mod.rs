//! The pre-training model, the main model, losses and training loops.

mod loss;
mod pretrain;
mod stratmed;
mod train;

pub use loss::{bce_loss, combined_loss, combined_loss_var, ddi_loss, margin_loss, LossError};
pub use pretrain::PretrainModel;
pub use stratmed::StratMedModel;
pub use train::{
    load_main_checkpoint, save_main_checkpoint, train_main, train_pretrain, transfer_embeddings,
    CheckpointMeta, EpochRecord, TrainReport,
};

use serde::{Deserialize, Serialize};

use crate::data::Visit;
use crate::numerics::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub dim: usize,
    /// Decision threshold on probabilities.
    pub delta: f64,
    /// Weight of the accuracy terms against the DDI term.
    pub beta: f64,
    /// Weight of BCE against the margin loss.
    pub gamma: f64,
    pub lr: f64,
    pub weight_decay: f64,
    /// Epochs for each of the two training phases.
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 64,
            delta: 0.5,
            beta: 0.95,
            gamma: 0.06,
            lr: 0.0005,
            weight_decay: 0.05,
            epochs: 15,
            dropout: 0.5,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("dropout", self.dropout),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if self.dropout >= 1.0 {
            return Err("dropout must be < 1".into());
        }
        if self.dim == 0 {
            return Err("dim must be >= 1".into());
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err("lr and weight_decay must be >= 0".into());
        }
        Ok(())
    }
}

/// Ablation switches. `wo_sg` bypasses both graph layers and implies `wo_s`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub wo_p: bool,
    pub wo_s: bool,
    pub wo_sg: bool,
}

impl Ablation {
    pub fn normalized(self) -> Self {
        Self {
            wo_s: self.wo_s || self.wo_sg,
            ..self
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.wo_p, self.wo_s, self.wo_sg) {
            (_, _, true) => "wo_sg",
            (false, false, false) => "full",
            (true, false, false) => "wo_p",
            (false, true, false) => "wo_s",
            (true, true, false) => "wo_p_wo_s",
        }
    }
}

/// `{i : p_i >= delta}`.
pub fn predict_set(probabilities: &[f64], delta: f64) -> Vec<usize> {
    probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= delta)
        .map(|(i, _)| i)
        .collect()
}

/// Anything that scores every medication for every visit of a patient,
/// using the true history up to and including that visit's diagnoses and
/// procedures.
pub trait Recommender {
    fn num_med(&self) -> usize;
    fn threshold(&self) -> f64;
    /// One probability vector per visit, in visit order.
    fn predict_patient(&self, visits: &[Visit]) -> Result<Vec<Vec<f64>>, TensorError>;
}
