//! Metrics and (bootstrap) evaluation of a [`Recommender`] on one split.
//!
//! Every visit is predicted with its true history. Jaccard, F1, PRAUC and
//! set size are averaged over all visits of the split; the per-patient mean
//! Jaccard is reported alongside. The DDI rate is pooled over all visits.

mod metrics;

pub use metrics::{avg_drugs, ddi_rate, f1, jaccard, prauc};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{DataError, Dataset, DdiMatrix, Split};
use crate::model::{predict_set, Recommender};
use crate::rng::{self, streams};
use crate::Result;

/// Model output for one visit next to the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitOutcome {
    pub probabilities: Vec<f64>,
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub jaccard: f64,
    pub f1: f64,
    pub prauc: f64,
    pub ddi_rate: f64,
    pub avg_drugs: f64,
    /// Mean over patients of each patient's mean visit Jaccard.
    pub jaccard_per_patient: f64,
    pub visits: usize,
    pub patients: usize,
}

/// Predictions for every visit of every patient in `split`.
pub fn predict_split<R: Recommender + ?Sized>(
    model: &R,
    dataset: &Dataset,
    split: Split,
) -> Result<Vec<Vec<VisitOutcome>>> {
    let delta = model.threshold();
    dataset
        .split(split)
        .map(|p| {
            let probs = model.predict_patient(p.visits())?;
            Ok(probs
                .into_iter()
                .zip(p.visits())
                .map(|(pr, v)| VisitOutcome {
                    predicted: predict_set(&pr, delta),
                    probabilities: pr,
                    truth: v.med_ids().to_vec(),
                })
                .collect())
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates per-visit outcomes of the given patients.
pub fn summarize(patients: &[&[VisitOutcome]], ddi: &DdiMatrix) -> Evaluation {
    let visits: Vec<&VisitOutcome> = patients.iter().flat_map(|p| p.iter()).collect();
    let skipped = visits.iter().filter(|v| v.truth.is_empty()).count();
    if skipped > 0 {
        log::warn!("{skipped} visits without true medications skipped for f1/prauc");
    }
    let sets: Vec<Vec<usize>> = visits.iter().map(|v| v.predicted.clone()).collect();
    Evaluation {
        jaccard: mean(visits.iter().map(|v| jaccard(&v.predicted, &v.truth))),
        f1: mean(visits.iter().filter_map(|v| f1(&v.predicted, &v.truth))),
        prauc: mean(
            visits
                .iter()
                .filter_map(|v| prauc(&v.probabilities, &v.truth)),
        ),
        ddi_rate: ddi_rate(&sets, ddi),
        avg_drugs: avg_drugs(&sets),
        jaccard_per_patient: mean(
            patients
                .iter()
                .filter(|p| !p.is_empty())
                .map(|p| mean(p.iter().map(|v| jaccard(&v.predicted, &v.truth)))),
        ),
        visits: visits.len(),
        patients: patients.len(),
    }
}

/// Plain evaluation over all visits of `split`.
pub fn evaluate<R: Recommender + ?Sized>(
    model: &R,
    dataset: &Dataset,
    split: Split,
    ddi: &DdiMatrix,
) -> Result<Evaluation> {
    let outcomes = predict_split(model, dataset, split)?;
    if outcomes.is_empty() {
        return Err(DataError::Invalid(format!("{split} split has no patients")).into());
    }
    let refs: Vec<&[VisitOutcome]> = outcomes.iter().map(Vec::as_slice).collect();
    Ok(summarize(&refs, ddi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub rounds: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            fraction: 0.8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub jaccard: MeanStd,
    pub ddi: MeanStd,
    pub f1: MeanStd,
    pub prauc: MeanStd,
    pub avg_drugs: MeanStd,
    pub jaccard_per_patient: MeanStd,
    pub rounds: usize,
    pub fraction: f64,
    pub seed: u64,
    pub per_round: Vec<Evaluation>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "jaccard_mean,jaccard_std,ddi_mean,ddi_std,f1_mean,f1_std,\
prauc_mean,prauc_std,avg_drugs_mean,avg_drugs_std,rounds,seed";

    pub fn from_rounds(per_round: Vec<Evaluation>, config: &BootstrapConfig) -> Self {
        let col =
            |f: fn(&Evaluation) -> f64| MeanStd::of(&per_round.iter().map(f).collect::<Vec<_>>());
        Self {
            jaccard: col(|e| e.jaccard),
            ddi: col(|e| e.ddi_rate),
            f1: col(|e| e.f1),
            prauc: col(|e| e.prauc),
            avg_drugs: col(|e| e.avg_drugs),
            jaccard_per_patient: col(|e| e.jaccard_per_patient),
            rounds: config.rounds,
            fraction: config.fraction,
            seed: config.seed,
            per_round,
        }
    }

    pub fn csv_row(&self) -> String {
        let m = [self.jaccard, self.ddi, self.f1, self.prauc, self.avg_drugs];
        let mut cells: Vec<String> = m
            .iter()
            .flat_map(|x| [x.mean.to_string(), x.std.to_string()])
            .collect();
        cells.push(self.rounds.to_string());
        cells.push(self.seed.to_string());
        cells.join(",")
    }
}

/// Bootstrap over the patients of `split`: each round draws
/// `ceil(fraction * patients)` patients with replacement. A single round at
/// fraction 1 evaluates every patient exactly once.
pub fn bootstrap_evaluate<R: Recommender + ?Sized>(
    model: &R,
    dataset: &Dataset,
    split: Split,
    ddi: &DdiMatrix,
    config: &BootstrapConfig,
) -> Result<MetricsReport> {
    if config.rounds == 0 || !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(crate::Error::Config(format!(
            "bootstrap needs rounds >= 1 and fraction in (0, 1], got {} and {}",
            config.rounds, config.fraction
        )));
    }
    let outcomes = predict_split(model, dataset, split)?;
    let n = outcomes.len();
    if n == 0 {
        return Err(DataError::Invalid(format!("{split} split has no patients")).into());
    }
    let per_round = if config.rounds == 1 && config.fraction == 1.0 {
        let all: Vec<&[VisitOutcome]> = outcomes.iter().map(Vec::as_slice).collect();
        vec![summarize(&all, ddi)]
    } else {
        let mut r = rng::stream(config.seed, streams::BOOTSTRAP);
        let size = (config.fraction * n as f64).ceil() as usize;
        (0..config.rounds)
            .map(|_| {
                let sample: Vec<&[VisitOutcome]> = (0..size)
                    .map(|_| outcomes[r.gen_range(0..n)].as_slice())
                    .collect();
                summarize(&sample, ddi)
            })
            .collect()
    };
    Ok(MetricsReport::from_rounds(per_round, config))
}
