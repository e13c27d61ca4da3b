//! Per-visit set metrics. Sets are sorted, deduplicated id slices.

use crate::data::DdiMatrix;

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `|pred ∩ truth| / |pred ∪ truth|`; 1 when both are empty.
pub fn jaccard(pred: &[usize], truth: &[usize]) -> f64 {
    let inter = intersection(pred, truth);
    let union = pred.len() + truth.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Harmonic mean of precision and recall; `None` for an empty truth set.
pub fn f1(pred: &[usize], truth: &[usize]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let inter = intersection(pred, truth);
    if inter == 0 {
        return Some(0.0);
    }
    let precision = inter as f64 / pred.len() as f64;
    let recall = inter as f64 / truth.len() as f64;
    Some(2.0 * precision * recall / (precision + recall))
}

/// Area under the precision-recall curve from a ranked sweep: medications
/// sorted by descending score (ties by ascending id), summing precision@k
/// times the recall increment at each true medication.
pub fn prauc(scores: &[f64], truth: &[usize]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut area = 0.0;
    for (rank, id) in order.iter().enumerate() {
        if truth.binary_search(id).is_ok() {
            hits += 1;
            area += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(area / truth.len() as f64)
}

/// Interacting unordered pairs over all unordered pairs, pooled over visits;
/// 0 when no visit has two medications.
pub fn ddi_rate(pred_sets: &[Vec<usize>], ddi: &DdiMatrix) -> f64 {
    let (mut bad, mut all) = (0usize, 0usize);
    for set in pred_sets {
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                all += 1;
                if ddi.get(i, j) {
                    bad += 1;
                }
            }
        }
    }
    if all == 0 {
        0.0
    } else {
        bad as f64 / all as f64
    }
}

/// Mean set size; 0 for no sets.
pub fn avg_drugs(pred_sets: &[Vec<usize>]) -> f64 {
    if pred_sets.is_empty() {
        return 0.0;
    }
    pred_sets.iter().map(Vec::len).sum::<usize>() as f64 / pred_sets.len() as f64
}
