//! Patient-level splitting and the dataset perturbations used by the
//! distortion and sparsity studies.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, EntityKind, PatientRecord, Split, Visit};
use crate::rng::{self, streams};

pub const DISTORTION_LEVELS: [u32; 5] = [100, 110, 120, 130, 140];
pub const LOW_FREQUENCY_THRESHOLDS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

/// Fraction of entities (by descending frequency) in the common tier.
pub const COMMON_FRACTION: f64 = 0.10;
/// Fraction of entities (by ascending frequency) in the rare tier.
pub const RARE_FRACTION: f64 = 0.60;

/// Bucket sizes for `n` items: floor of each share, then the remainder goes
/// one by one to the largest fractional parts (lower bucket index first on ties).
pub(crate) fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &b in order.iter().take(n.saturating_sub(assigned)) {
        sizes[b] += 1;
    }
    sizes
}

/// Reassigns every patient to train/validation/test. Patient order is kept;
/// only the split labels change.
pub fn split_dataset(dataset: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset, DataError> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(DataError::Invalid(format!(
            "split ratios {ratios:?} outside [0, 1]"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::Invalid(format!(
            "split ratios {ratios:?} sum to {sum}, expected 1"
        )));
    }
    let n = dataset.patients.len();
    let buckets = ratios.iter().filter(|&&r| r > 0.0).count();
    if n < buckets {
        return Err(DataError::Invalid(format!(
            "{n} patients cannot fill {buckets} splits"
        )));
    }
    let sizes = apportion(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, streams::SPLIT));
    let mut labels = vec![Split::Train; n];
    let mut pos = 0;
    for (split, &size) in Split::ALL.iter().zip(&sizes) {
        for &idx in &order[pos..pos + size] {
            labels[idx] = *split;
        }
        pos += size;
    }
    let mut out = dataset.clone();
    for (p, split) in out.patients.iter_mut().zip(labels) {
        p.split = split;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Common,
    Moderate,
    Rare,
}

/// Tiers of one entity class by training-split occurrence frequency:
/// the top 10% of entities are common, the bottom 60% rare, the rest
/// moderate. Ties are ranked by ascending id.
pub fn entity_tiers(dataset: &Dataset, kind: EntityKind) -> Vec<Tier> {
    let n = dataset.vocab.size(kind);
    let mut counts = vec![0usize; n];
    for v in dataset.split_visits(Split::Train) {
        for &id in v.ids(kind) {
            counts[id] += 1;
        }
    }
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let n_common = (COMMON_FRACTION * n as f64).ceil() as usize;
    let n_rare = (RARE_FRACTION * n as f64).floor() as usize;
    let n_rare = n_rare.min(n - n_common.min(n));
    let mut tiers = vec![Tier::Moderate; n];
    for (rank, &id) in ranked.iter().enumerate() {
        if rank < n_common {
            tiers[id] = Tier::Common;
        } else if rank >= n - n_rare {
            tiers[id] = Tier::Rare;
        }
    }
    tiers
}

/// Removes `(level - 100)%` of the moderate-tier occurrence volume of every
/// entity class, uniformly at random. An occurrence whose removal would
/// leave its visit without diagnoses or medications is skipped, so common-
/// and rare-tier counts are untouched. Level 100 returns the input.
pub fn distort_dataset(dataset: &Dataset, level: u32, seed: u64) -> Result<Dataset, DataError> {
    if !DISTORTION_LEVELS.contains(&level) {
        return Err(DataError::Invalid(format!(
            "distortion level {level} not in {DISTORTION_LEVELS:?}"
        )));
    }
    if level == 100 {
        return Ok(dataset.clone());
    }
    let fraction = (level - 100) as f64 / 100.0;
    let mut rng = rng::stream(seed, streams::DISTORT);
    // visits as mutable id lists: [patient][visit][kind]
    let mut lists: Vec<Vec<[Vec<usize>; 3]>> = dataset
        .patients
        .iter()
        .map(|p| {
            p.visits()
                .iter()
                .map(|v| {
                    [
                        v.diag_ids().to_vec(),
                        v.proc_ids().to_vec(),
                        v.med_ids().to_vec(),
                    ]
                })
                .collect()
        })
        .collect();

    for (k, kind) in EntityKind::ALL.into_iter().enumerate() {
        let tiers = entity_tiers(dataset, kind);
        let mut occurrences: Vec<(usize, usize, usize)> = Vec::new();
        for (pi, visits) in lists.iter().enumerate() {
            for (vi, ids) in visits.iter().enumerate() {
                for &id in &ids[k] {
                    if tiers[id] == Tier::Moderate {
                        occurrences.push((pi, vi, id));
                    }
                }
            }
        }
        let target = (fraction * occurrences.len() as f64).round() as usize;
        occurrences.shuffle(&mut rng);
        let mut removed = 0;
        for (pi, vi, id) in occurrences {
            if removed == target {
                break;
            }
            let ids = &mut lists[pi][vi][k];
            if kind != EntityKind::Procedure && ids.len() == 1 {
                continue;
            }
            ids.retain(|&x| x != id);
            removed += 1;
        }
        if removed < target {
            log::warn!(
                "distortion {level}: removed {removed} of {target} moderate {kind} occurrences"
            );
        }
    }

    let mut patients = Vec::with_capacity(dataset.patients.len());
    for (p, visits) in dataset.patients.iter().zip(lists) {
        let kept: Vec<Visit> = visits
            .into_iter()
            .filter(|ids| !ids[0].is_empty() && !ids[2].is_empty())
            .map(|[d, pr, m]| Visit::new(d, pr, m))
            .collect::<Result<_, _>>()?;
        if !kept.is_empty() {
            patients.push(PatientRecord::new(p.patient_id.clone(), p.split, kept)?);
        }
    }
    Ok(Dataset {
        vocab: dataset.vocab,
        patients,
    })
}

/// Permutes the medication sets across all training visits, breaking the
/// link between a visit's diagnoses/procedures and its medications while
/// keeping the marginal medication statistics. Other splits are untouched.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut meds: Vec<Vec<usize>> = dataset
        .split_visits(Split::Train)
        .map(|v| v.med_ids().to_vec())
        .collect();
    meds.shuffle(&mut rng::stream(seed, streams::SHUFFLE_LABELS));
    let mut meds = meds.into_iter();
    let patients = dataset
        .patients
        .iter()
        .map(|p| {
            if p.split != Split::Train {
                return p.clone();
            }
            let visits = p
                .visits()
                .iter()
                .map(|v| {
                    v.with_ids(
                        EntityKind::Medication,
                        meds.next().expect("one med set per training visit"),
                    )
                })
                .collect();
            PatientRecord {
                patient_id: p.patient_id.clone(),
                split: p.split,
                visits,
            }
        })
        .collect();
    Dataset {
        vocab: dataset.vocab,
        patients,
    }
}

/// Erasure predicate of the sparsity study: a diagnosis or procedure present
/// in at least `mu`% of the reference visits is erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowFrequencyFilter {
    erased_diag: Vec<bool>,
    erased_proc: Vec<bool>,
}

impl LowFrequencyFilter {
    pub fn fit(reference: &Dataset, mu_percent: f64) -> Self {
        let total = reference.num_visits() as f64;
        let mut diag = vec![0usize; reference.vocab.num_diag];
        let mut proc = vec![0usize; reference.vocab.num_proc];
        for p in &reference.patients {
            for v in p.visits() {
                v.diag_ids().iter().for_each(|&d| diag[d] += 1);
                v.proc_ids().iter().for_each(|&x| proc[x] += 1);
            }
        }
        // retained iff 100 * count < mu * total (exact for integral mu)
        let erase = |c: &usize| (*c as f64) * 100.0 >= mu_percent * total;
        Self {
            erased_diag: diag.iter().map(erase).collect(),
            erased_proc: proc.iter().map(erase).collect(),
        }
    }

    pub fn is_erased(&self, kind: EntityKind, id: usize) -> bool {
        match kind {
            EntityKind::Diagnosis => self.erased_diag[id],
            EntityKind::Procedure => self.erased_proc[id],
            EntityKind::Medication => false,
        }
    }

    /// Erases flagged entities; visits left without diagnoses are dropped,
    /// then patients left without visits.
    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        let mut patients = Vec::new();
        for p in &dataset.patients {
            let visits: Vec<Visit> = p
                .visits()
                .iter()
                .filter_map(|v| {
                    let diag: Vec<usize> = v
                        .diag_ids()
                        .iter()
                        .copied()
                        .filter(|&d| !self.erased_diag[d])
                        .collect();
                    if diag.is_empty() {
                        return None;
                    }
                    let proc: Vec<usize> = v
                        .proc_ids()
                        .iter()
                        .copied()
                        .filter(|&x| !self.erased_proc[x])
                        .collect();
                    Some(
                        v.with_ids(EntityKind::Diagnosis, diag)
                            .with_ids(EntityKind::Procedure, proc),
                    )
                })
                .collect();
            if !visits.is_empty() {
                patients.push(PatientRecord {
                    patient_id: p.patient_id.clone(),
                    split: p.split,
                    visits,
                });
            }
        }
        Dataset {
            vocab: dataset.vocab,
            patients,
        }
    }
}

/// Keeps only diagnoses and procedures occurring in fewer than `mu`% of the
/// dataset's visits. Medications are untouched.
pub fn filter_low_frequency(dataset: &Dataset, mu_percent: f64) -> Dataset {
    LowFrequencyFilter::fit(dataset, mu_percent).apply(dataset)
}
