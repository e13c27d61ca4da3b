//! EHR data model: vocabularies, visits, patients, datasets and the
//! drug-drug interaction matrix.

mod io;
pub mod synthetic;
mod transform;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub use io::{load_dataset, load_ddi, save_dataset, save_ddi};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use transform::{
    distort_dataset, entity_tiers, filter_low_frequency, shuffle_labels, split_dataset,
    LowFrequencyFilter, Tier, DISTORTION_LEVELS, LOW_FREQUENCY_THRESHOLDS,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {kind} id {id} out of bounds (vocabulary size {size})")]
    OutOfBounds {
        line: usize,
        kind: EntityKind,
        id: usize,
        size: usize,
    },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("infeasible synthetic config: {0}")]
    Infeasible(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Diagnosis,
    Procedure,
    Medication,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [
        EntityKind::Diagnosis,
        EntityKind::Procedure,
        EntityKind::Medication,
    ];
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Diagnosis => "diagnosis",
            EntityKind::Procedure => "procedure",
            EntityKind::Medication => "medication",
        })
    }
}

/// Sizes of the diagnosis, procedure and medication vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityVocab {
    pub num_diag: usize,
    pub num_proc: usize,
    pub num_med: usize,
}

impl EntityVocab {
    pub fn new(num_diag: usize, num_proc: usize, num_med: usize) -> Result<Self, DataError> {
        if num_diag == 0 || num_proc == 0 || num_med == 0 {
            return Err(DataError::Invalid(format!(
                "vocabulary sizes must be >= 1, got ({num_diag}, {num_proc}, {num_med})"
            )));
        }
        Ok(Self {
            num_diag,
            num_proc,
            num_med,
        })
    }

    pub fn size(&self, kind: EntityKind) -> usize {
        match kind {
            EntityKind::Diagnosis => self.num_diag,
            EntityKind::Procedure => self.num_proc,
            EntityKind::Medication => self.num_med,
        }
    }
}

/// One clinical visit. Id lists are kept sorted and duplicate-free so that
/// the order in which codes were recorded never influences downstream results.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Visit {
    diag_ids: Vec<usize>,
    proc_ids: Vec<usize>,
    med_ids: Vec<usize>,
}

impl Visit {
    /// Canonicalizes (sorts, deduplicates) the three id lists. Diagnoses and
    /// medications must be nonempty.
    pub fn new(
        mut diag_ids: Vec<usize>,
        mut proc_ids: Vec<usize>,
        mut med_ids: Vec<usize>,
    ) -> Result<Self, DataError> {
        for ids in [&mut diag_ids, &mut proc_ids, &mut med_ids] {
            ids.sort_unstable();
            ids.dedup();
        }
        if diag_ids.is_empty() {
            return Err(DataError::Invalid("visit without diagnoses".into()));
        }
        if med_ids.is_empty() {
            return Err(DataError::Invalid("visit without medications".into()));
        }
        Ok(Self {
            diag_ids,
            proc_ids,
            med_ids,
        })
    }

    pub fn diag_ids(&self) -> &[usize] {
        &self.diag_ids
    }

    pub fn proc_ids(&self) -> &[usize] {
        &self.proc_ids
    }

    pub fn med_ids(&self) -> &[usize] {
        &self.med_ids
    }

    pub fn ids(&self, kind: EntityKind) -> &[usize] {
        match kind {
            EntityKind::Diagnosis => &self.diag_ids,
            EntityKind::Procedure => &self.proc_ids,
            EntityKind::Medication => &self.med_ids,
        }
    }

    /// First out-of-vocabulary id, if any.
    pub fn check_bounds(&self, vocab: &EntityVocab) -> Option<(EntityKind, usize)> {
        EntityKind::ALL.into_iter().find_map(|kind| {
            let size = vocab.size(kind);
            // sorted, so the last id is the largest
            self.ids(kind)
                .last()
                .filter(|&&id| id >= size)
                .map(|&id| (kind, id))
        })
    }

    pub(crate) fn with_ids(&self, kind: EntityKind, ids: Vec<usize>) -> Self {
        let mut v = self.clone();
        match kind {
            EntityKind::Diagnosis => v.diag_ids = ids,
            EntityKind::Procedure => v.proc_ids = ids,
            EntityKind::Medication => v.med_ids = ids,
        }
        v
    }

    pub fn total_occurrences(&self) -> usize {
        self.diag_ids.len() + self.proc_ids.len() + self.med_ids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(rename = "val")]
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub split: Split,
    visits: Vec<Visit>,
}

impl PatientRecord {
    pub fn new(
        patient_id: impl Into<String>,
        split: Split,
        visits: Vec<Visit>,
    ) -> Result<Self, DataError> {
        let patient_id = patient_id.into();
        if visits.is_empty() {
            return Err(DataError::Invalid(format!(
                "patient {patient_id} has no visits"
            )));
        }
        Ok(Self {
            patient_id,
            split,
            visits,
        })
    }

    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub vocab: EntityVocab,
    pub patients: Vec<PatientRecord>,
}

impl Dataset {
    /// Validates every visit against the vocabulary.
    pub fn new(vocab: EntityVocab, patients: Vec<PatientRecord>) -> Result<Self, DataError> {
        for p in &patients {
            for v in p.visits() {
                if let Some((kind, id)) = v.check_bounds(&vocab) {
                    return Err(DataError::Invalid(format!(
                        "patient {}: {kind} id {id} out of bounds (size {})",
                        p.patient_id,
                        vocab.size(kind)
                    )));
                }
            }
        }
        Ok(Self { vocab, patients })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &PatientRecord> {
        self.patients.iter().filter(move |p| p.split == split)
    }

    pub fn split_visits(&self, split: Split) -> impl Iterator<Item = &Visit> {
        self.split(split).flat_map(|p| p.visits().iter())
    }

    pub fn num_visits(&self) -> usize {
        self.patients.iter().map(|p| p.visits().len()).sum()
    }

    /// Keeps only the patients of one split (split labels are preserved).
    pub fn subset(&self, split: Split) -> Dataset {
        Dataset {
            vocab: self.vocab,
            patients: self.split(split).cloned().collect(),
        }
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for p in &self.patients {
            sizes[p.split as usize] += 1;
        }
        sizes
    }
}

/// Symmetric 0/1 drug-drug interaction matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DdiMatrix {
    size: usize,
    entries: Vec<u8>,
}

impl DdiMatrix {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            entries: vec![0; size * size],
        }
    }

    /// Builds the matrix from undirected edges; self-loops are rejected.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self, DataError> {
        let mut m = Self::empty(size);
        for &(i, j) in edges {
            if i >= size || j >= size {
                return Err(DataError::Invalid(format!(
                    "ddi edge ({i},{j}) outside {size} medications"
                )));
            }
            if i == j {
                return Err(DataError::Invalid(format!("ddi self-loop on {i}")));
            }
            m.entries[i * size + j] = 1;
            m.entries[j * size + i] = 1;
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.size + j] != 0
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.size {
            for j in (i + 1)..self.size {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.entries.iter().filter(|&&e| e != 0).count() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MultiHotError {
    OutOfBounds { id: usize, size: usize },
}

impl fmt::Display for MultiHotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiHotError::OutOfBounds { id, size } => write!(f, "id {id} >= size {size}"),
        }
    }
}

impl std::error::Error for MultiHotError {}

/// 0/1 indicator vector with ones exactly at `ids`.
pub fn multi_hot(ids: &[usize], size: usize) -> Result<Vec<f64>, MultiHotError> {
    let mut v = vec![0.0; size];
    for &id in ids {
        if id >= size {
            return Err(MultiHotError::OutOfBounds { id, size });
        }
        v[id] = 1.0;
    }
    Ok(v)
}
