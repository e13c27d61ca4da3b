use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{combined_loss_var, Ablation, Hyperparams, PretrainModel, StratMedModel};
use crate::data::{multi_hot, Dataset, DdiMatrix, Split};
use crate::eval::evaluate;
use crate::numerics::{load_checkpoint, save_checkpoint, Adam, AdamConfig, ParamStore, Tape};
use crate::rng::{self, streams};
use crate::strat::Buckets;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-visit training loss.
    pub train_loss: f64,
    pub val_jaccard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

fn adam(hyper: &Hyperparams, store: &ParamStore) -> Adam {
    Adam::new(
        AdamConfig {
            lr: hyper.lr,
            weight_decay: hyper.weight_decay,
            ..Default::default()
        },
        store,
    )
}

/// Trains the entity-level prototype on every training visit, one optimizer
/// step per visit, for `hyper.epochs` epochs. Returns the model and the mean
/// training loss of each epoch.
pub fn train_pretrain(
    dataset: &Dataset,
    ddi: &DdiMatrix,
    hyper: &Hyperparams,
) -> Result<(PretrainModel, Vec<f64>)> {
    hyper.validate().map_err(Error::Config)?;
    let mut model = PretrainModel::new(dataset.vocab, *hyper);
    let mut opt = adam(hyper, &model.params);
    let mut order_rng = rng::stream(hyper.seed, streams::PRETRAIN_ORDER);
    let mut drop_rng = rng::stream(hyper.seed, streams::PRETRAIN_DROPOUT);
    let mut patients: Vec<_> = dataset.split(Split::Train).collect();
    if patients.is_empty() {
        return Err(Error::Model("training split is empty".into()));
    }
    let num_med = dataset.vocab.num_med;
    let mut losses = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        patients.shuffle(&mut order_rng);
        let (mut total, mut count) = (0.0, 0usize);
        for p in &patients {
            let visits = p.visits();
            for (t, v) in visits.iter().enumerate() {
                let prev = if t == 0 {
                    &[][..]
                } else {
                    visits[t - 1].med_ids()
                };
                let truth =
                    multi_hot(v.med_ids(), num_med).map_err(|e| Error::Model(e.to_string()))?;
                let mut tape = Tape::new();
                let probs = model.forward(&mut tape, v, prev, Some(&mut drop_rng))?;
                let loss =
                    combined_loss_var(&mut tape, probs, &truth, ddi, hyper.beta, hyper.gamma)?;
                total += tape.value(loss).item();
                count += 1;
                tape.backward(loss, &mut model.params)?;
                opt.step(&mut model.params);
            }
        }
        let mean = total / count as f64;
        log::info!("pretrain epoch {epoch}: loss {mean:.5}");
        losses.push(mean);
    }
    Ok((model, losses))
}

/// Copies the three embedding tables of `pretrained` into `main`.
pub fn transfer_embeddings(pretrained: &PretrainModel, main: &mut StratMedModel) -> Result<()> {
    for (from, to) in [
        (pretrained.e_d.weights, main.e_d.weights),
        (pretrained.e_p.weights, main.e_p.weights),
        (pretrained.e_m.weights, main.e_m.weights),
    ] {
        let src = &pretrained.params.get(from).value;
        let dst = main.params.get_mut(to);
        if src.shape() != dst.value.shape() {
            return Err(Error::Model(format!(
                "cannot transfer {}: shape {:?} vs {:?}",
                dst.name,
                src.shape(),
                dst.value.shape()
            )));
        }
        dst.value = src.clone();
    }
    Ok(())
}

/// Trains the main model in place. Every visit of every training patient
/// (with its true history) contributes one loss and one optimizer step;
/// patients are reshuffled each epoch. After training the parameters of the
/// epoch with the best validation Jaccard (earliest on ties) are restored;
/// without validation patients the last epoch is kept.
pub fn train_main(model: &mut StratMedModel, dataset: &Dataset) -> Result<TrainReport> {
    let hyper = model.hyper;
    hyper.validate().map_err(Error::Config)?;
    let mut opt = adam(&hyper, &model.params);
    let mut order_rng = rng::stream(hyper.seed, streams::EPOCH_ORDER);
    let mut drop_rng = rng::stream(hyper.seed, streams::DROPOUT);
    let mut patients: Vec<_> = dataset.split(Split::Train).collect();
    if patients.is_empty() {
        return Err(Error::Model("training split is empty".into()));
    }
    let has_val = dataset.split(Split::Validation).next().is_some();
    let num_med = dataset.vocab.num_med;
    let ddi = model.ddi.clone();
    let mut records = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    for epoch in 1..=hyper.epochs {
        patients.shuffle(&mut order_rng);
        let (mut total, mut count) = (0.0, 0usize);
        for p in &patients {
            let visits = p.visits();
            for t in 0..visits.len() {
                let truth = multi_hot(visits[t].med_ids(), num_med)
                    .map_err(|e| Error::Model(e.to_string()))?;
                let mut tape = Tape::new();
                let probs = model.forward(&mut tape, &visits[..=t], Some(&mut drop_rng))?;
                let loss =
                    combined_loss_var(&mut tape, probs, &truth, &ddi, hyper.beta, hyper.gamma)?;
                total += tape.value(loss).item();
                count += 1;
                tape.backward(loss, &mut model.params)?;
                opt.step(&mut model.params);
            }
        }
        let val_jaccard = if has_val {
            Some(evaluate(&*model, dataset, Split::Validation, &ddi)?.jaccard)
        } else {
            None
        };
        let train_loss = total / count as f64;
        log::info!("epoch {epoch}: loss {train_loss:.5}, val jaccard {val_jaccard:?}");
        if let Some(j) = val_jaccard {
            if best.as_ref().is_none_or(|(b, _, _)| j > *b) {
                best = Some((j, epoch, model.params.clone()));
            }
        }
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_jaccard,
        });
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            model.params.zero_grads();
            epoch
        }
        None => hyper.epochs,
    };
    Ok(TrainReport {
        epochs: records,
        best_epoch,
    })
}

/// JSON sidecar written next to a main-model checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub hyperparams: Hyperparams,
    pub ablation: Ablation,
    /// sha256 of the bucket summaries as JSON.
    pub bucket_summary_hash: String,
    pub best_epoch: usize,
}

fn bucket_hash(buckets: &Buckets) -> Result<String> {
    let json = serde_json::to_vec(&buckets.summaries())?;
    Ok(hex::encode(Sha256::digest(&json)))
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes the parameters to `path` and the metadata to `path` with a `.json`
/// extension.
pub fn save_main_checkpoint(
    model: &StratMedModel,
    best_epoch: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    save_checkpoint(&model.params, path)?;
    let meta = CheckpointMeta {
        hyperparams: model.hyper,
        ablation: model.ablation,
        bucket_summary_hash: bucket_hash(&model.buckets)?,
        best_epoch,
    };
    let side = sidecar(path);
    fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&side, e))
}

/// Rebuilds a main model from a checkpoint written by
/// [`save_main_checkpoint`]. The buckets must be the ones it was trained with
/// (checked through their summary hash).
pub fn load_main_checkpoint(
    path: impl AsRef<Path>,
    dataset_vocab: crate::data::EntityVocab,
    buckets: Buckets,
    ddi: DdiMatrix,
) -> Result<(StratMedModel, CheckpointMeta)> {
    let path = path.as_ref();
    let side = sidecar(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    let mut model =
        StratMedModel::new(dataset_vocab, buckets, ddi, meta.hyperparams, meta.ablation);
    if bucket_hash(&model.buckets)? != meta.bucket_summary_hash {
        return Err(Error::Model(format!(
            "{}: buckets differ from the ones the checkpoint was trained with",
            path.display()
        )));
    }
    let stored = load_checkpoint(path)?;
    if stored.len() != model.params.len() {
        return Err(Error::Model(format!(
            "{}: {} tensors, model expects {}",
            path.display(),
            stored.len(),
            model.params.len()
        )));
    }
    for (dst, src) in model.params.iter_mut().zip(stored.iter()) {
        if dst.name != src.name || dst.value.shape() != src.value.shape() {
            return Err(Error::Model(format!(
                "{}: tensor {} {:?} does not match {} {:?}",
                path.display(),
                src.name,
                src.value.shape(),
                dst.name,
                dst.value.shape()
            )));
        }
        dst.value = src.value.clone();
    }
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::model::Recommender;
    use crate::strat::{count_cooccurrence, StratParams};

    fn data(patients: usize) -> (Dataset, DdiMatrix) {
        generate_synthetic(&SyntheticConfig {
            num_patients: patients,
            num_diag: 30,
            num_proc: 12,
            num_med: 15,
            seed: 8,
            ..Default::default()
        })
        .unwrap()
    }

    fn hyper(epochs: usize) -> Hyperparams {
        Hyperparams {
            dim: 8,
            epochs,
            lr: 0.005,
            seed: 3,
            ..Default::default()
        }
    }

    fn main_model(d: &Dataset, ddi: &DdiMatrix, h: Hyperparams) -> StratMedModel {
        let cooc = count_cooccurrence(d, Split::Train).unwrap();
        let params = StratParams {
            q_mm: 5,
            q_md: 10,
            q_mp: 10,
            theta_fraction: 0.01,
            ..Default::default()
        };
        StratMedModel::new(
            d.vocab,
            Buckets::build(&cooc, &params).unwrap(),
            ddi.clone(),
            h,
            Ablation::default(),
        )
    }

    #[test]
    fn pretrain_zero_lr_keeps_tables_and_loss_decreases() {
        let (d, ddi) = data(50);
        let frozen = Hyperparams {
            lr: 0.0,
            ..hyper(1)
        };
        let (m, _) = train_pretrain(&d, &ddi, &frozen).unwrap();
        let init = PretrainModel::new(d.vocab, frozen);
        assert_eq!(
            m.params.get(m.e_d.weights).value,
            init.params.get(init.e_d.weights).value
        );

        let (_, losses) = train_pretrain(&d, &ddi, &hyper(6)).unwrap();
        assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
    }

    #[test]
    fn pretrain_is_deterministic() {
        let (d, ddi) = data(30);
        let (a, la) = train_pretrain(&d, &ddi, &hyper(2)).unwrap();
        let (b, lb) = train_pretrain(&d, &ddi, &hyper(2)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(la, lb);
    }

    #[test]
    fn transfer_copies_tables_which_then_train() {
        let (d, ddi) = data(30);
        let (pre, _) = train_pretrain(&d, &ddi, &hyper(1)).unwrap();
        let mut m = main_model(&d, &ddi, hyper(1));
        transfer_embeddings(&pre, &mut m).unwrap();
        assert_eq!(
            m.params.get(m.e_m.weights).value,
            pre.params.get(pre.e_m.weights).value
        );
        train_main(&mut m, &d).unwrap();
        assert_ne!(
            m.params.get(m.e_m.weights).value,
            pre.params.get(pre.e_m.weights).value
        );

        let other = crate::data::EntityVocab::new(31, 12, 15).unwrap();
        let mismatched = PretrainModel::new(other, hyper(1));
        assert!(transfer_embeddings(&mismatched, &mut m).is_err());
    }

    #[test]
    fn main_training_selects_best_validation_epoch() {
        let (d, ddi) = data(60);
        let mut m = main_model(&d, &ddi, hyper(4));
        let report = train_main(&mut m, &d).unwrap();
        assert_eq!(report.epochs.len(), 4);
        let vals: Vec<f64> = report
            .epochs
            .iter()
            .map(|e| e.val_jaccard.unwrap())
            .collect();
        let best = vals[report.best_epoch - 1];
        assert!(vals.iter().all(|&v| v <= best));
        assert!(best >= vals[0]);
        // the restored parameters reproduce the best validation score
        let now = evaluate(&m, &d, Split::Validation, &ddi).unwrap().jaccard;
        assert_eq!(now, best);

        let mut again = main_model(&d, &ddi, hyper(4));
        assert_eq!(train_main(&mut again, &d).unwrap(), report);
        assert_eq!(again.params, m.params);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (d, ddi) = data(30);
        let mut m = main_model(&d, &ddi, hyper(1));
        let r = train_main(&mut m, &d).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("main.ckpt");
        save_main_checkpoint(&m, r.best_epoch, &path).unwrap();
        let (back, meta) =
            load_main_checkpoint(&path, d.vocab, m.buckets.clone(), ddi.clone()).unwrap();
        assert_eq!(meta.best_epoch, r.best_epoch);
        let p = d.split(Split::Test).next().unwrap();
        assert_eq!(
            back.predict_patient(p.visits()).unwrap(),
            m.predict_patient(p.visits()).unwrap()
        );

        let other = Buckets::unstratified(15, 30, 12);
        assert!(load_main_checkpoint(&path, d.vocab, other, ddi).is_err());
    }
}
