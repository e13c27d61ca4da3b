//! Seeded long-tailed EHR generator.
//!
//! Entity popularity follows a Zipf law over a seeded permutation of each
//! vocabulary. Every diagnosis owns a latent set of medications and a latent
//! procedure; a visit's prescription is the union of the latent medication
//! sets of its diagnoses, perturbed by the noise rate. Interactions are
//! sampled preferentially between medications that rarely co-occur.

use rand::Rng as _;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::transform::split_dataset;
use super::{DataError, Dataset, DdiMatrix, EntityVocab, PatientRecord, Split, Visit};
use crate::rng::{self, streams, Rng};

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_patients: usize,
    pub num_diag: usize,
    pub num_proc: usize,
    pub num_med: usize,
    /// Mean of the (geometric, >= 1) visits-per-patient distribution.
    pub mean_visits: f64,
    pub diag_per_visit: (usize, usize),
    pub proc_per_visit: (usize, usize),
    pub diag_exponent: f64,
    pub proc_exponent: f64,
    pub med_exponent: f64,
    pub meds_per_diag: usize,
    pub noise: f64,
    pub ddi_density: f64,
    /// A pair co-occurring `c` times is drawn as an interaction with weight
    /// `(1 + c)^-ddi_bias`; 0 samples uniformly.
    pub ddi_bias: f64,
    /// Probability that a diagnosis carries over to the patient's next visit.
    pub carry_over: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_patients: 500,
            num_diag: 150,
            num_proc: 80,
            num_med: 60,
            mean_visits: 2.5,
            diag_per_visit: (2, 6),
            proc_per_visit: (1, 3),
            diag_exponent: 1.1,
            proc_exponent: 1.1,
            med_exponent: 1.0,
            meds_per_diag: 2,
            noise: 0.1,
            ddi_density: 0.05,
            ddi_bias: 0.25,
            carry_over: 0.5,
            seed: 42,
        }
    }
}

const KEYS: &[&str] = &[
    "num_patients",
    "num_diag",
    "num_proc",
    "num_med",
    "mean_visits",
    "diag_min",
    "diag_max",
    "proc_min",
    "proc_max",
    "diag_exponent",
    "proc_exponent",
    "med_exponent",
    "meds_per_diag",
    "noise",
    "ddi_density",
    "ddi_bias",
    "carry_over",
    "seed",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, DataError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| DataError::Invalid(format!("synthetic config key `{key}`: {e}")))
}

impl SyntheticConfig {
    /// Parses flat `key=value` text. Blank lines and `#` comments are skipped;
    /// unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut pairs = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| DataError::Parse {
                line: idx + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            pairs.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = Self::default();
        cfg.apply(&pairs)?;
        Ok(cfg)
    }

    /// Overrides fields from `key -> value` pairs.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), DataError> {
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "num_patients" => self.num_patients = parse_value(key, v)?,
                "num_diag" => self.num_diag = parse_value(key, v)?,
                "num_proc" => self.num_proc = parse_value(key, v)?,
                "num_med" => self.num_med = parse_value(key, v)?,
                "mean_visits" => self.mean_visits = parse_value(key, v)?,
                "diag_min" => self.diag_per_visit.0 = parse_value(key, v)?,
                "diag_max" => self.diag_per_visit.1 = parse_value(key, v)?,
                "proc_min" => self.proc_per_visit.0 = parse_value(key, v)?,
                "proc_max" => self.proc_per_visit.1 = parse_value(key, v)?,
                "diag_exponent" => self.diag_exponent = parse_value(key, v)?,
                "proc_exponent" => self.proc_exponent = parse_value(key, v)?,
                "med_exponent" => self.med_exponent = parse_value(key, v)?,
                "meds_per_diag" => self.meds_per_diag = parse_value(key, v)?,
                "noise" => self.noise = parse_value(key, v)?,
                "ddi_density" => self.ddi_density = parse_value(key, v)?,
                "ddi_bias" => self.ddi_bias = parse_value(key, v)?,
                "carry_over" => self.carry_over = parse_value(key, v)?,
                "seed" => self.seed = parse_value(key, v)?,
                other => {
                    return Err(DataError::Invalid(format!(
                        "unknown synthetic config key `{other}` (known: {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_patients={}", self.num_patients);
        let _ = writeln!(s, "num_diag={}", self.num_diag);
        let _ = writeln!(s, "num_proc={}", self.num_proc);
        let _ = writeln!(s, "num_med={}", self.num_med);
        let _ = writeln!(s, "mean_visits={}", self.mean_visits);
        let _ = writeln!(s, "diag_min={}", self.diag_per_visit.0);
        let _ = writeln!(s, "diag_max={}", self.diag_per_visit.1);
        let _ = writeln!(s, "proc_min={}", self.proc_per_visit.0);
        let _ = writeln!(s, "proc_max={}", self.proc_per_visit.1);
        let _ = writeln!(s, "diag_exponent={}", self.diag_exponent);
        let _ = writeln!(s, "proc_exponent={}", self.proc_exponent);
        let _ = writeln!(s, "med_exponent={}", self.med_exponent);
        let _ = writeln!(s, "meds_per_diag={}", self.meds_per_diag);
        let _ = writeln!(s, "noise={}", self.noise);
        let _ = writeln!(s, "ddi_density={}", self.ddi_density);
        let _ = writeln!(s, "ddi_bias={}", self.ddi_bias);
        let _ = writeln!(s, "carry_over={}", self.carry_over);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let infeasible = |m: String| Err(DataError::Infeasible(m));
        if self.num_patients < 3 {
            return infeasible(format!(
                "need at least 3 patients to fill the splits, got {}",
                self.num_patients
            ));
        }
        EntityVocab::new(self.num_diag, self.num_proc, self.num_med)
            .map_err(|e| DataError::Infeasible(e.to_string()))?;
        for (name, rate) in [
            ("noise", self.noise),
            ("ddi_density", self.ddi_density),
            ("carry_over", self.carry_over),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return infeasible(format!("{name} = {rate} outside [0, 1]"));
            }
        }
        for (name, e) in [
            ("diag_exponent", self.diag_exponent),
            ("proc_exponent", self.proc_exponent),
            ("med_exponent", self.med_exponent),
        ] {
            if !(e > 0.0 && e.is_finite()) {
                return infeasible(format!("{name} = {e} must be > 0"));
            }
        }
        if !(self.ddi_bias >= 0.0 && self.ddi_bias.is_finite()) {
            return infeasible(format!("ddi_bias = {} must be >= 0", self.ddi_bias));
        }
        if !(self.mean_visits >= 1.0 && self.mean_visits.is_finite()) {
            return infeasible(format!("mean_visits = {} must be >= 1", self.mean_visits));
        }
        let (dmin, dmax) = self.diag_per_visit;
        if dmin == 0 || dmin > dmax || dmax > self.num_diag {
            return infeasible(format!(
                "diagnosis set size range [{dmin}, {dmax}] infeasible for {} diagnoses",
                self.num_diag
            ));
        }
        let (pmin, pmax) = self.proc_per_visit;
        if pmin > pmax || pmax > self.num_proc {
            return infeasible(format!(
                "procedure set size range [{pmin}, {pmax}] infeasible for {} procedures",
                self.num_proc
            ));
        }
        if self.meds_per_diag == 0 || self.meds_per_diag > self.num_med {
            return infeasible(format!(
                "meds_per_diag = {} infeasible for {} medications",
                self.meds_per_diag, self.num_med
            ));
        }
        Ok(())
    }
}

/// Zipf weights `1 / (rank + 1)^s` assigned through a seeded popularity
/// permutation of the ids.
fn zipf_weights(rng: &mut Rng, n: usize, exponent: f64) -> Vec<f64> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut w = vec![0.0; n];
    for (rank, &id) in order.iter().enumerate() {
        w[id] = 1.0 / ((rank + 1) as f64).powf(exponent);
    }
    w
}

/// Weighted sampling of `k` distinct indices (Efraimidis-Spirakis keys).
/// Zero-weight items are never drawn.
fn sample_distinct(rng: &mut Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

fn sample_one(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Latent structure behind a generated corpus. Exposed for tests.
#[derive(Debug, Clone)]
pub struct LatentMaps {
    pub diag_to_meds: Vec<Vec<usize>>,
    pub diag_to_proc: Vec<usize>,
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(Dataset, DdiMatrix), DataError> {
    generate_with_latent(config).map(|(d, m, _)| (d, m))
}

pub fn generate_with_latent(
    config: &SyntheticConfig,
) -> Result<(Dataset, DdiMatrix, LatentMaps), DataError> {
    config.validate()?;
    let vocab = EntityVocab::new(config.num_diag, config.num_proc, config.num_med)?;

    let mut vrng = rng::stream(config.seed, streams::SYNTH_VOCAB);
    let diag_w = zipf_weights(&mut vrng, config.num_diag, config.diag_exponent);
    let proc_w = zipf_weights(&mut vrng, config.num_proc, config.proc_exponent);
    let med_w = zipf_weights(&mut vrng, config.num_med, config.med_exponent);
    let latent = LatentMaps {
        diag_to_meds: (0..config.num_diag)
            .map(|_| sample_distinct(&mut vrng, &med_w, config.meds_per_diag))
            .collect(),
        diag_to_proc: (0..config.num_diag)
            .map(|_| sample_one(&mut vrng, &proc_w))
            .collect(),
    };

    let mut prng = rng::stream(config.seed, streams::SYNTH_PATIENTS);
    let continue_p = 1.0 - 1.0 / config.mean_visits;
    let mut patients = Vec::with_capacity(config.num_patients);
    for pid in 0..config.num_patients {
        let mut n_visits = 1;
        while n_visits < 30 && prng.gen_bool(continue_p) {
            n_visits += 1;
        }
        let mut visits = Vec::with_capacity(n_visits);
        let mut prev_diags: Vec<usize> = Vec::new();
        for _ in 0..n_visits {
            let k = prng.gen_range(config.diag_per_visit.0..=config.diag_per_visit.1);
            let mut diags: Vec<usize> = prev_diags
                .iter()
                .copied()
                .filter(|_| prng.gen_bool(config.carry_over))
                .take(k)
                .collect();
            if diags.len() < k {
                let mut w = diag_w.clone();
                for &d in &diags {
                    w[d] = 0.0;
                }
                diags.extend(sample_distinct(&mut prng, &w, k - diags.len()));
            }
            diags.sort_unstable();

            let kp = prng.gen_range(config.proc_per_visit.0..=config.proc_per_visit.1);
            let mut procs: Vec<usize> = Vec::with_capacity(kp);
            let mut attempts = 0;
            while procs.len() < kp && attempts < 8 * kp + 8 {
                attempts += 1;
                let p = if prng.gen_bool(0.5) {
                    latent.diag_to_proc[diags[prng.gen_range(0..diags.len())]]
                } else {
                    sample_one(&mut prng, &proc_w)
                };
                if !procs.contains(&p) {
                    procs.push(p);
                }
            }

            let mut union: Vec<usize> = diags
                .iter()
                .flat_map(|&d| latent.diag_to_meds[d].iter().copied())
                .collect();
            union.sort_unstable();
            union.dedup();
            let mut meds: Vec<usize> = Vec::with_capacity(union.len() + 2);
            for &m in &union {
                if !prng.gen_bool(config.noise) {
                    meds.push(m);
                }
                if prng.gen_bool(config.noise) {
                    meds.push(sample_one(&mut prng, &med_w));
                }
            }
            if meds.is_empty() {
                meds.push(union[prng.gen_range(0..union.len())]);
            }

            visits.push(Visit::new(diags.clone(), procs, meds)?);
            prev_diags = diags;
        }
        patients.push(PatientRecord::new(
            format!("P{pid:05}"),
            Split::Train,
            visits,
        )?);
    }
    let dataset = Dataset::new(vocab, patients)?;
    let dataset = split_dataset(&dataset, DEFAULT_SPLIT_RATIOS, config.seed)?;
    let ddi = sample_ddi(&dataset, config)?;
    Ok((dataset, ddi, latent))
}

/// Interaction edges drawn without replacement with weight `1 / (1 + c)^2`,
/// where `c` is the pair's co-prescription count in the generated corpus.
fn sample_ddi(dataset: &Dataset, config: &SyntheticConfig) -> Result<DdiMatrix, DataError> {
    let m = config.num_med;
    let mut counts = vec![0u32; m * m];
    for p in &dataset.patients {
        for v in p.visits() {
            let meds = v.med_ids();
            for (a, &i) in meds.iter().enumerate() {
                for &j in &meds[a + 1..] {
                    counts[i * m + j] += 1;
                }
            }
        }
    }
    let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
    let mut weights = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            pairs.push((i, j));
            let c = counts[i * m + j] as f64;
            weights.push((1.0 + c).powf(-config.ddi_bias));
        }
    }
    let n_edges = (config.ddi_density * pairs.len() as f64).round() as usize;
    let mut rng = rng::stream(config.seed, streams::SYNTH_DDI);
    let chosen = sample_distinct(&mut rng, &weights, n_edges);
    let edges: Vec<(usize, usize)> = chosen.into_iter().map(|idx| pairs[idx]).collect();
    DdiMatrix::from_edges(m, &edges)
}
