//! The staged pipeline: data, stratify, pretrain, train, evaluate.
//!
//! Each stage owns a directory under the output dir holding its artifacts and
//! an `input.sha256` key: the hash of the stage's settings and of the bytes of
//! the artifacts it consumes. A stage whose key matches and whose artifacts
//! are all present is loaded instead of recomputed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{DataSource, RunConfig};
use crate::data::{
    generate_synthetic, load_dataset, load_ddi, save_dataset, save_ddi, Dataset, DdiMatrix, Split,
};
use crate::eval::{bootstrap_evaluate, MetricsReport};
use crate::model::{
    load_main_checkpoint, save_main_checkpoint, train_main, train_pretrain, transfer_embeddings,
    Ablation, Hyperparams, PretrainModel, StratMedModel, TrainReport,
};
use crate::numerics::{load_checkpoint, save_checkpoint};
use crate::strat::{count_cooccurrence, Buckets, StratParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    GenData,
    Stratify,
    Pretrain,
    Train,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Stratify => "stratify",
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Stage::GenData => "data",
            Stage::Stratify => "strat",
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
            Stage::Evaluate => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub seconds: f64,
    pub cache_hit: bool,
    pub input_hash: String,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<StageRecord>,
    pub total_seconds: f64,
}

impl ExperimentManifest {
    pub fn cache_hits(&self) -> usize {
        self.stages.iter().filter(|s| s.cache_hit).count()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub dataset: Dataset,
    pub ddi: DdiMatrix,
    pub buckets: Option<Buckets>,
    pub model: Option<StratMedModel>,
    pub train_report: Option<TrainReport>,
    pub report: Option<MetricsReport>,
    pub manifest: ExperimentManifest,
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha_hex(&[&read(path)?]))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn stage_err(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage: stage.name(),
        source: Box::new(e),
    }
}

/// Loads or generates the configured corpus.
pub fn load_data(config: &RunConfig) -> Result<(Dataset, DdiMatrix)> {
    match &config.data {
        DataSource::Synthetic(sc) => Ok(generate_synthetic(sc)?),
        DataSource::Files { dataset, ddi } => {
            let d = load_dataset(dataset)?;
            let m = load_ddi(ddi, d.vocab.num_med)?;
            Ok((d, m))
        }
    }
}

/// Buckets from the training split, or the single-layer buckets when
/// stratification is ablated.
pub fn stratify(dataset: &Dataset, params: &StratParams, ablation: Ablation) -> Result<Buckets> {
    if ablation.normalized().wo_s {
        let v = dataset.vocab;
        return Ok(Buckets::unstratified(v.num_med, v.num_diag, v.num_proc));
    }
    let cooc = count_cooccurrence(dataset, Split::Train)?;
    Ok(Buckets::build(&cooc, params)?)
}

pub fn pretrain_hyper(config: &RunConfig) -> Hyperparams {
    Hyperparams {
        epochs: config.pretrain_epochs,
        ..config.hyper
    }
}

/// A trained main model with its training record.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: StratMedModel,
    pub report: TrainReport,
}

/// Stratify, optionally pretrain, and train in memory.
pub fn train_variant(
    dataset: &Dataset,
    ddi: &DdiMatrix,
    config: &RunConfig,
    ablation: Ablation,
) -> Result<Trained> {
    let ablation = ablation.normalized();
    let buckets = stratify(dataset, &config.strat, ablation)?;
    let mut model = StratMedModel::new(dataset.vocab, buckets, ddi.clone(), config.hyper, ablation);
    if !ablation.wo_p {
        let (pre, _) = train_pretrain(dataset, ddi, &pretrain_hyper(config))?;
        transfer_embeddings(&pre, &mut model)?;
    }
    let report = train_main(&mut model, dataset)?;
    Ok(Trained { model, report })
}

struct Runner<'a> {
    out: &'a Path,
    records: Vec<StageRecord>,
}

impl Runner<'_> {
    fn dir(&self, stage: Stage) -> Result<PathBuf> {
        let d = self.out.join(stage.dir());
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    /// Runs `compute` unless the stage directory holds a matching key and
    /// every artifact; then `load` reads the artifacts back.
    fn stage<T>(
        &mut self,
        stage: Stage,
        key: String,
        artifacts: &[&str],
        compute: impl FnOnce(&Path) -> Result<T>,
        load: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let dir = self.dir(stage)?;
        let key_path = dir.join("input.sha256");
        let paths: Vec<PathBuf> = artifacts.iter().map(|a| dir.join(a)).collect();
        let hit = fs::read_to_string(&key_path).is_ok_and(|k| k.trim() == key)
            && paths.iter().all(|p| p.is_file());
        let value = if hit {
            log::info!("{}: cache hit", stage.name());
            load(&dir).map_err(stage_err(stage))?
        } else {
            let _ = fs::remove_file(&key_path);
            log::info!("{}: running", stage.name());
            let v = compute(&dir).map_err(stage_err(stage))?;
            write_atomic(&key_path, format!("{key}\n").as_bytes())?;
            v
        };
        self.records.push(StageRecord {
            stage,
            seconds: start.elapsed().as_secs_f64(),
            cache_hit: hit,
            input_hash: key,
            artifacts: paths,
        });
        Ok(value)
    }
}

/// Runs every stage up to and including `until`, reusing cached stages, and
/// writes `manifest.json` into the output directory.
pub fn run_pipeline(config: &RunConfig, until: Stage) -> Result<PipelineOutput> {
    let start = Instant::now();
    config.validate()?;
    let out = config.out_dir.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ablation = config.ablation();
    let mut r = Runner {
        out,
        records: Vec::new(),
    };

    let data_key = match &config.data {
        DataSource::Synthetic(sc) => sha_hex(&[b"synthetic", sc.to_text().as_bytes()]),
        DataSource::Files { dataset, ddi } => sha_hex(&[
            b"files",
            file_hash(dataset)?.as_bytes(),
            file_hash(ddi)?.as_bytes(),
        ]),
    };
    let (dataset, ddi) = r.stage(
        Stage::GenData,
        data_key,
        &["dataset.jsonl", "ddi.csv"],
        |dir| {
            let (d, m) = load_data(config)?;
            save_dataset(&d, dir.join("dataset.jsonl"))?;
            save_ddi(&m, dir.join("ddi.csv"))?;
            Ok((d, m))
        },
        |dir| {
            let d = load_dataset(dir.join("dataset.jsonl"))?;
            let m = load_ddi(dir.join("ddi.csv"), d.vocab.num_med)?;
            Ok((d, m))
        },
    )?;
    let data_dir = out.join(Stage::GenData.dir());
    let data_hash = sha_hex(&[
        file_hash(&data_dir.join("dataset.jsonl"))?.as_bytes(),
        file_hash(&data_dir.join("ddi.csv"))?.as_bytes(),
    ]);

    let mut output = PipelineOutput {
        dataset,
        ddi,
        buckets: None,
        model: None,
        train_report: None,
        report: None,
        manifest: ExperimentManifest {
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
            total_seconds: 0.0,
        },
    };

    if until >= Stage::Stratify {
        let key = sha_hex(&[
            data_hash.as_bytes(),
            &serde_json::to_vec(&config.strat)?,
            &[ablation.wo_s as u8],
        ]);
        let dataset = &output.dataset;
        let buckets = r.stage(
            Stage::Stratify,
            key,
            &["buckets.json", "summary.json"],
            |dir| {
                let b = stratify(dataset, &config.strat, ablation)?;
                write_atomic(&dir.join("buckets.json"), &serde_json::to_vec(&b)?)?;
                write_atomic(&dir.join("summary.json"), &json(&b.summaries())?)?;
                Ok(b)
            },
            |dir| Ok(serde_json::from_slice(&read(&dir.join("buckets.json"))?)?),
        )?;
        output.buckets = Some(buckets);
    }
    let bucket_hash = || file_hash(&out.join(Stage::Stratify.dir()).join("buckets.json"));

    let mut pretrained: Option<PretrainModel> = None;
    let mut pretrain_hash = String::from("none");
    if until >= Stage::Pretrain && !ablation.wo_p {
        let hyper = pretrain_hyper(config);
        let key = sha_hex(&[data_hash.as_bytes(), &serde_json::to_vec(&hyper)?]);
        let (dataset, ddi) = (&output.dataset, &output.ddi);
        let model = r.stage(
            Stage::Pretrain,
            key,
            &["pretrain.ckpt"],
            |dir| {
                let (m, losses) = train_pretrain(dataset, ddi, &hyper)?;
                save_checkpoint(&m.params, dir.join("pretrain.ckpt"))?;
                write_atomic(&dir.join("losses.json"), &json(&losses)?)?;
                Ok(m)
            },
            |dir| {
                let mut m = PretrainModel::new(dataset.vocab, hyper);
                let stored = load_checkpoint(dir.join("pretrain.ckpt"))?;
                copy_params(&stored, &mut m.params)?;
                Ok(m)
            },
        )?;
        pretrain_hash = file_hash(&out.join(Stage::Pretrain.dir()).join("pretrain.ckpt"))?;
        pretrained = Some(model);
    }

    if until >= Stage::Train {
        let key = sha_hex(&[
            data_hash.as_bytes(),
            bucket_hash()?.as_bytes(),
            pretrain_hash.as_bytes(),
            &serde_json::to_vec(&config.hyper)?,
            &serde_json::to_vec(&ablation)?,
        ]);
        let (dataset, ddi) = (&output.dataset, &output.ddi);
        let buckets = output.buckets.clone().expect("stratify ran");
        let (model, report) = r.stage(
            Stage::Train,
            key,
            &["model.ckpt", "model.json", "train_report.json"],
            |dir| {
                let mut model = StratMedModel::new(
                    dataset.vocab,
                    buckets.clone(),
                    ddi.clone(),
                    config.hyper,
                    ablation,
                );
                if let Some(pre) = &pretrained {
                    transfer_embeddings(pre, &mut model)?;
                }
                let report = train_main(&mut model, dataset)?;
                save_main_checkpoint(&model, report.best_epoch, dir.join("model.ckpt"))?;
                write_atomic(&dir.join("train_report.json"), &json(&report)?)?;
                Ok((model, report))
            },
            |dir| {
                let (model, _) = load_main_checkpoint(
                    dir.join("model.ckpt"),
                    dataset.vocab,
                    buckets.clone(),
                    ddi.clone(),
                )?;
                let report = serde_json::from_slice(&read(&dir.join("train_report.json"))?)?;
                Ok((model, report))
            },
        )?;
        output.model = Some(model);
        output.train_report = Some(report);
    }

    if until >= Stage::Evaluate {
        let train_dir = out.join(Stage::Train.dir());
        let key = sha_hex(&[
            data_hash.as_bytes(),
            file_hash(&train_dir.join("model.ckpt"))?.as_bytes(),
            file_hash(&train_dir.join("model.json"))?.as_bytes(),
            &serde_json::to_vec(&config.bootstrap)?,
        ]);
        let model = output.model.as_ref().expect("train ran");
        let (dataset, ddi) = (&output.dataset, &output.ddi);
        let report = r.stage(
            Stage::Evaluate,
            key,
            &["metrics.json", "metrics.csv"],
            |dir| {
                let report =
                    bootstrap_evaluate(model, dataset, Split::Test, ddi, &config.bootstrap)?;
                write_atomic(&dir.join("metrics.json"), &json(&report)?)?;
                let csv = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row());
                write_atomic(&dir.join("metrics.csv"), csv.as_bytes())?;
                Ok(report)
            },
            |dir| Ok(serde_json::from_slice(&read(&dir.join("metrics.json"))?)?),
        )?;
        output.report = Some(report);
    }

    output.manifest.stages = r.records;
    output.manifest.total_seconds = start.elapsed().as_secs_f64();
    write_atomic(&out.join("manifest.json"), &json(&output.manifest)?)?;
    Ok(output)
}

fn copy_params(
    stored: &crate::numerics::ParamStore,
    into: &mut crate::numerics::ParamStore,
) -> Result<()> {
    if stored.len() != into.len() {
        return Err(Error::Model(format!(
            "checkpoint holds {} tensors, model expects {}",
            stored.len(),
            into.len()
        )));
    }
    for (dst, src) in into.iter_mut().zip(stored.iter()) {
        if dst.name != src.name || dst.value.shape() != src.value.shape() {
            return Err(Error::Model(format!(
                "checkpoint tensor {} {:?} does not match {} {:?}",
                src.name,
                src.value.shape(),
                dst.name,
                dst.value.shape()
            )));
        }
        dst.value = src.value.clone();
    }
    Ok(())
}
