use serde::{Deserialize, Serialize};

use super::StratError;
use crate::data::{Dataset, EntityVocab, Split, Visit};

/// Visit-level co-occurrence counts. `med_med` is symmetric; its diagonal
/// holds per-medication visit counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoOccurrence {
    vocab: EntityVocab,
    med_med: Vec<u32>,
    med_diag: Vec<u32>,
    med_proc: Vec<u32>,
    total_visits: usize,
}

impl CoOccurrence {
    pub fn zeros(vocab: EntityVocab) -> Self {
        Self {
            vocab,
            med_med: vec![0; vocab.num_med * vocab.num_med],
            med_diag: vec![0; vocab.num_med * vocab.num_diag],
            med_proc: vec![0; vocab.num_med * vocab.num_proc],
            total_visits: 0,
        }
    }

    pub fn add_visit(&mut self, v: &Visit) {
        let (m, nd, np) = (self.vocab.num_med, self.vocab.num_diag, self.vocab.num_proc);
        for &i in v.med_ids() {
            for &j in v.med_ids() {
                self.med_med[i * m + j] += 1;
            }
            for &d in v.diag_ids() {
                self.med_diag[i * nd + d] += 1;
            }
            for &p in v.proc_ids() {
                self.med_proc[i * np + p] += 1;
            }
        }
        self.total_visits += 1;
    }

    /// Adds another partial count (counts are an associative, commutative fold).
    pub fn merge(&mut self, other: &CoOccurrence) {
        assert_eq!(
            self.vocab, other.vocab,
            "merging counts over different vocabularies"
        );
        for (a, b) in self.med_med.iter_mut().zip(&other.med_med) {
            *a += b;
        }
        for (a, b) in self.med_diag.iter_mut().zip(&other.med_diag) {
            *a += b;
        }
        for (a, b) in self.med_proc.iter_mut().zip(&other.med_proc) {
            *a += b;
        }
        self.total_visits += other.total_visits;
    }

    pub fn num_med(&self) -> usize {
        self.vocab.num_med
    }

    pub fn num_diag(&self) -> usize {
        self.vocab.num_diag
    }

    pub fn num_proc(&self) -> usize {
        self.vocab.num_proc
    }

    pub fn total_visits(&self) -> usize {
        self.total_visits
    }

    #[inline]
    pub fn med_med(&self, i: usize, j: usize) -> u32 {
        self.med_med[i * self.vocab.num_med + j]
    }

    #[inline]
    pub fn med_diag(&self, i: usize, d: usize) -> u32 {
        self.med_diag[i * self.vocab.num_diag + d]
    }

    #[inline]
    pub fn med_proc(&self, i: usize, p: usize) -> u32 {
        self.med_proc[i * self.vocab.num_proc + p]
    }
}

/// Counts co-occurrences over the visits of one split.
pub fn count_cooccurrence(dataset: &Dataset, split: Split) -> Result<CoOccurrence, StratError> {
    let mut c = CoOccurrence::zeros(dataset.vocab);
    for v in dataset.split_visits(split) {
        c.add_visit(v);
    }
    if c.total_visits == 0 {
        return Err(StratError::EmptyTraining);
    }
    Ok(c)
}
