//! Multi-seed experiment protocols: overfitting under distortion and
//! robustness to erasing frequent diagnoses/procedures.

use std::fmt::Write as _;

use serde::Serialize;

use super::config::RunConfig;
use super::pipeline::{load_data, train_variant};
use crate::data::{distort_dataset, filter_low_frequency, Split};
use crate::eval::evaluate;
use crate::model::Ablation;
use crate::Result;

/// The two variants compared by the studies, derived from the configured
/// ablation: stratification on (`full`) and off (`wo_s`).
pub fn study_variants(config: &RunConfig) -> [(&'static str, Ablation); 2] {
    let base = Ablation {
        wo_p: config.ablation.wo_p,
        wo_s: false,
        wo_sg: false,
    };
    [("full", base), ("wo_s", Ablation { wo_s: true, ..base })]
}

/// One trained model of the distortion study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionCell {
    pub seed: u64,
    pub level: u32,
    pub variant: &'static str,
    pub train_jaccard: f64,
    pub test_jaccard: f64,
    pub test_ddi_rate: f64,
}

/// Seed means per level and variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionRow {
    pub level: u32,
    pub variant: &'static str,
    pub train_jaccard: f64,
    pub test_jaccard: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionStudy {
    pub rows: Vec<DistortionRow>,
    pub cells: Vec<DistortionCell>,
}

impl DistortionStudy {
    pub const CSV_HEADER: &'static str = "level,variant,train_jaccard,test_jaccard,gap";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.level, r.variant, r.train_jaccard, r.test_jaccard, r.gap
            );
        }
        s
    }

    pub fn row(&self, level: u32, variant: &str) -> Option<&DistortionRow> {
        self.rows
            .iter()
            .find(|r| r.level == level && r.variant == variant)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// For every seed, level and variant: distort the corpus, train, and record
/// train and test Jaccard. Rows hold the seed means, with
/// `gap = train_jaccard - test_jaccard`.
pub fn distortion_study(config: &RunConfig) -> Result<DistortionStudy> {
    config.validate()?;
    let variants = study_variants(config);
    let mut cells = Vec::new();
    for &seed in &config.study_seeds {
        let cfg = config.clone().with_seed(seed);
        let (data, ddi) = load_data(&cfg)?;
        for &level in &config.levels {
            let distorted = distort_dataset(&data, level, seed)?;
            for (name, ablation) in variants {
                log::info!("distortion: seed {seed}, level {level}, {name}");
                let t = train_variant(&distorted, &ddi, &cfg, ablation)?;
                let train = evaluate(&t.model, &distorted, Split::Train, &ddi)?;
                let test = evaluate(&t.model, &distorted, Split::Test, &ddi)?;
                cells.push(DistortionCell {
                    seed,
                    level,
                    variant: name,
                    train_jaccard: train.jaccard,
                    test_jaccard: test.jaccard,
                    test_ddi_rate: test.ddi_rate,
                });
            }
        }
    }
    let mut rows = Vec::new();
    for &level in &config.levels {
        for (name, _) in variants {
            let sel = || {
                cells
                    .iter()
                    .filter(|c| c.level == level && c.variant == name)
            };
            let train_jaccard = mean(sel().map(|c| c.train_jaccard));
            let test_jaccard = mean(sel().map(|c| c.test_jaccard));
            rows.push(DistortionRow {
                level,
                variant: name,
                train_jaccard,
                test_jaccard,
                gap: train_jaccard - test_jaccard,
            });
        }
    }
    Ok(DistortionStudy { rows, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCell {
    pub seed: u64,
    pub mu: f64,
    pub variant: &'static str,
    pub base_jaccard: f64,
    pub filtered_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub mu: f64,
    pub variant: &'static str,
    pub jaccard_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessStudy {
    pub rows: Vec<RobustnessRow>,
    pub cells: Vec<RobustnessCell>,
}

impl RobustnessStudy {
    pub const CSV_HEADER: &'static str = "mu,variant,jaccard_delta";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.mu, r.variant, r.jaccard_delta);
        }
        s
    }
}

/// For every seed and variant: train on the undistorted corpus, then compare
/// test Jaccard on `filter_low_frequency(test, mu)` against the unfiltered
/// test split. Rows hold the seed mean of the difference.
pub fn robustness_study(config: &RunConfig) -> Result<RobustnessStudy> {
    config.validate()?;
    let variants = study_variants(config);
    let mut cells = Vec::new();
    for &seed in &config.study_seeds {
        let cfg = config.clone().with_seed(seed);
        let (data, ddi) = load_data(&cfg)?;
        let test = data.subset(Split::Test);
        for (name, ablation) in variants {
            log::info!("robustness: seed {seed}, {name}");
            let t = train_variant(&data, &ddi, &cfg, ablation)?;
            let base = evaluate(&t.model, &test, Split::Test, &ddi)?.jaccard;
            for &mu in &config.mus {
                let filtered = filter_low_frequency(&test, mu);
                let j = evaluate(&t.model, &filtered, Split::Test, &ddi)?.jaccard;
                cells.push(RobustnessCell {
                    seed,
                    mu,
                    variant: name,
                    base_jaccard: base,
                    filtered_jaccard: j,
                });
            }
        }
    }
    let mut rows = Vec::new();
    for &mu in &config.mus {
        for (name, _) in variants {
            let jaccard_delta = mean(
                cells
                    .iter()
                    .filter(|c| c.mu == mu && c.variant == name)
                    .map(|c| c.filtered_jaccard - c.base_jaccard),
            );
            rows.push(RobustnessRow {
                mu,
                variant: name,
                jaccard_delta,
            });
        }
    }
    Ok(RobustnessStudy { rows, cells })
}
