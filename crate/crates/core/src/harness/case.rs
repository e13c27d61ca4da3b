//! Per-visit case study: how the stratification sees one visit's diagnoses
//! against the medications that were predicted or prescribed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::pipeline::write_atomic;
use crate::data::{DataError, Dataset, Split};
use crate::model::{predict_set, Recommender, StratMedModel};
use crate::strat::{count_cooccurrence, RelevanceBucket};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudy {
    pub patient_id: String,
    pub visit_index: usize,
    /// Row labels: the visit's diagnoses.
    pub diag_ids: Vec<usize>,
    /// Column labels: predicted ∪ true medications, ascending.
    pub med_ids: Vec<usize>,
    /// Training-split co-occurrence counts.
    pub counts: Vec<Vec<u32>>,
    /// Relevance assigned by the model's diagnosis bucket; 0 when erased.
    pub relevance: Vec<Vec<f64>>,
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    /// Predicted and true.
    pub correct: Vec<usize>,
    /// Predicted but not true.
    pub over: Vec<usize>,
    /// True but missed.
    pub error: Vec<usize>,
}

fn sorted_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter()
        .copied()
        .filter(|x| b.binary_search(x).is_err())
        .collect()
}

pub fn case_study(
    model: &StratMedModel,
    dataset: &Dataset,
    patient_id: &str,
    visit_index: usize,
) -> Result<CaseStudy> {
    let patient = dataset
        .patients
        .iter()
        .find(|p| p.patient_id == patient_id)
        .ok_or_else(|| DataError::Invalid(format!("unknown patient `{patient_id}`")))?;
    let visits = patient.visits();
    if visit_index >= visits.len() {
        return Err(DataError::Invalid(format!(
            "patient `{patient_id}` has {} visits, no visit {visit_index}",
            visits.len()
        ))
        .into());
    }
    let probs = model.predict_patient(&visits[..=visit_index])?;
    let predicted = predict_set(&probs[visit_index], model.threshold());
    let visit = &visits[visit_index];
    let truth = visit.med_ids().to_vec();
    let correct: Vec<usize> = predicted
        .iter()
        .copied()
        .filter(|m| truth.binary_search(m).is_ok())
        .collect();
    let over = sorted_difference(&predicted, &truth);
    let error = sorted_difference(&truth, &predicted);
    let mut med_ids: Vec<usize> = predicted.iter().chain(&truth).copied().collect();
    med_ids.sort_unstable();
    med_ids.dedup();

    let cooc = count_cooccurrence(dataset, Split::Train)?;
    let bucket: &RelevanceBucket = &model.buckets.diag;
    let diag_ids = visit.diag_ids().to_vec();
    let counts = diag_ids
        .iter()
        .map(|&d| med_ids.iter().map(|&m| cooc.med_diag(m, d)).collect())
        .collect();
    let relevance = diag_ids
        .iter()
        .map(|&d| {
            med_ids
                .iter()
                .map(|&m| bucket.relevance_or_zero(m, d))
                .collect()
        })
        .collect();
    Ok(CaseStudy {
        patient_id: patient_id.to_string(),
        visit_index,
        diag_ids,
        med_ids,
        counts,
        relevance,
        predicted,
        truth,
        correct,
        over,
        error,
    })
}

fn matrix_csv<T: std::fmt::Display>(rows: &[usize], cols: &[usize], cells: &[Vec<T>]) -> String {
    let mut s = String::from("diag");
    for c in cols {
        let _ = write!(s, ",{c}");
    }
    s.push('\n');
    for (r, line) in rows.iter().zip(cells) {
        let _ = write!(s, "{r}");
        for v in line {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

impl CaseStudy {
    /// Writes `counts.csv`, `relevance.csv` and `case.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(
            &dir.join("counts.csv"),
            matrix_csv(&self.diag_ids, &self.med_ids, &self.counts).as_bytes(),
        )?;
        write_atomic(
            &dir.join("relevance.csv"),
            matrix_csv(&self.diag_ids, &self.med_ids, &self.relevance).as_bytes(),
        )?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(&dir.join("case.json"), json.as_bytes())
    }
}
