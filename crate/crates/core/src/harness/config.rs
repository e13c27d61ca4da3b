//! Run configuration: flat `key=value` text with namespaced keys.
//!
//! ```text
//! seed=7
//! out=runs/demo
//! synth.num_patients=200
//! strat.q_mm=60
//! train.epochs=10
//! ablation.wo_s=true
//! ```
//!
//! The data comes either from `synth.*` (the default, a synthetic corpus) or
//! from `data.dataset` plus `data.ddi`; mixing the two is rejected. A single
//! `seed` drives generation, training, distortion and bootstrap sampling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::data::{SyntheticConfig, DISTORTION_LEVELS, LOW_FREQUENCY_THRESHOLDS};
use crate::eval::BootstrapConfig;
use crate::model::{Ablation, Hyperparams};
use crate::strat::StratParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Files { dataset: PathBuf, ddi: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub out_dir: PathBuf,
    pub hyper: Hyperparams,
    pub pretrain_epochs: usize,
    pub strat: StratParams,
    pub ablation: Ablation,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    pub levels: Vec<u32>,
    pub mus: Vec<f64>,
    /// Seeds of the multi-seed studies.
    pub study_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seed = Hyperparams::default().seed;
        Self {
            data: DataSource::Synthetic(SyntheticConfig::default()),
            out_dir: PathBuf::from("out"),
            hyper: Hyperparams::default(),
            pretrain_epochs: Hyperparams::default().epochs,
            strat: StratParams::default(),
            ablation: Ablation::default(),
            bootstrap: BootstrapConfig::default(),
            seed,
            levels: DISTORTION_LEVELS.to_vec(),
            mus: LOW_FREQUENCY_THRESHOLDS.to_vec(),
            study_seeds: vec![1, 2, 3],
        }
        .with_seed(seed)
    }
}

const KEYS: &[&str] = &[
    "seed",
    "out",
    "data.dataset",
    "data.ddi",
    "synth.<key>",
    "strat.q_mm",
    "strat.q_md",
    "strat.q_mp",
    "strat.k",
    "strat.theta_fraction",
    "strat.rho_md",
    "strat.rho_mp",
    "train.dim",
    "train.delta",
    "train.beta",
    "train.gamma",
    "train.lr",
    "train.weight_decay",
    "train.epochs",
    "train.pretrain_epochs",
    "train.dropout",
    "ablation.wo_p",
    "ablation.wo_s",
    "ablation.wo_sg",
    "bootstrap.rounds",
    "bootstrap.fraction",
    "study.levels",
    "study.mus",
    "study.seeds",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Splits config text into ordered `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got `{line}`",
                idx + 1
            ))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Sets the run seed and propagates it to every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.hyper.seed = seed;
        self.bootstrap.seed = seed;
        if let DataSource::Synthetic(s) = &mut self.data {
            s.seed = seed;
        }
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        let mut synth = BTreeMap::new();
        let (mut dataset, mut ddi) = (None, None);
        for (key, value) in pairs {
            let v = value.as_str();
            let h = &mut cfg.hyper;
            let s = &mut cfg.strat;
            match key.as_str() {
                "seed" => cfg.seed = parse(key, v)?,
                "out" => cfg.out_dir = PathBuf::from(v),
                "data.dataset" => dataset = Some(PathBuf::from(v)),
                "data.ddi" => ddi = Some(PathBuf::from(v)),
                "synth.seed" => {
                    return Err(Error::Config(
                        "synth.seed: the synthetic seed follows the top-level `seed` key".into(),
                    ))
                }
                k if k.starts_with("synth.") => {
                    synth.insert(k["synth.".len()..].to_string(), value.clone());
                }
                "strat.q_mm" => s.q_mm = parse(key, v)?,
                "strat.q_md" => s.q_md = parse(key, v)?,
                "strat.q_mp" => s.q_mp = parse(key, v)?,
                "strat.k" => s.k = parse(key, v)?,
                "strat.theta_fraction" => s.theta_fraction = parse(key, v)?,
                "strat.rho_md" => s.rho_md = parse(key, v)?,
                "strat.rho_mp" => s.rho_mp = parse(key, v)?,
                "train.dim" => h.dim = parse(key, v)?,
                "train.delta" => h.delta = parse(key, v)?,
                "train.beta" => h.beta = parse(key, v)?,
                "train.gamma" => h.gamma = parse(key, v)?,
                "train.lr" => h.lr = parse(key, v)?,
                "train.weight_decay" => h.weight_decay = parse(key, v)?,
                "train.epochs" => h.epochs = parse(key, v)?,
                "train.pretrain_epochs" => cfg.pretrain_epochs = parse(key, v)?,
                "train.dropout" => h.dropout = parse(key, v)?,
                "ablation.wo_p" => cfg.ablation.wo_p = parse(key, v)?,
                "ablation.wo_s" => cfg.ablation.wo_s = parse(key, v)?,
                "ablation.wo_sg" => cfg.ablation.wo_sg = parse(key, v)?,
                "bootstrap.rounds" => cfg.bootstrap.rounds = parse(key, v)?,
                "bootstrap.fraction" => cfg.bootstrap.fraction = parse(key, v)?,
                "study.levels" => cfg.levels = parse_list(key, v)?,
                "study.mus" => cfg.mus = parse_list(key, v)?,
                "study.seeds" => cfg.study_seeds = parse_list(key, v)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown config key `{other}` (known: {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        cfg.data = match (dataset, ddi) {
            (None, None) => {
                let mut sc = SyntheticConfig::default();
                sc.apply(&synth)
                    .map_err(|e| Error::Config(format!("synth: {e}")))?;
                DataSource::Synthetic(sc)
            }
            (Some(dataset), Some(ddi)) => {
                if let Some(k) = synth.keys().next() {
                    return Err(Error::Config(format!(
                        "synth.{k} given together with data.dataset: choose one data source"
                    )));
                }
                DataSource::Files { dataset, ddi }
            }
            _ => {
                return Err(Error::Config(
                    "data.dataset and data.ddi must be given together".into(),
                ))
            }
        };
        let seed = cfg.seed;
        let cfg = cfg.with_seed(seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate().map_err(Error::Config)?;
        self.strat.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()
                .map_err(|e| Error::Config(format!("synth: {e}")))?;
        }
        if self.bootstrap.rounds == 0
            || !(self.bootstrap.fraction > 0.0 && self.bootstrap.fraction <= 1.0)
        {
            return Err(Error::Config(format!(
                "bootstrap needs rounds >= 1 and fraction in (0, 1], got {} and {}",
                self.bootstrap.rounds, self.bootstrap.fraction
            )));
        }
        if let Some(l) = self.levels.iter().find(|l| !DISTORTION_LEVELS.contains(l)) {
            return Err(Error::Config(format!(
                "study.levels: {l} not in {DISTORTION_LEVELS:?}"
            )));
        }
        if let Some(m) = self.mus.iter().find(|m| !(**m > 0.0 && **m <= 100.0)) {
            return Err(Error::Config(format!("study.mus: {m} outside (0, 100]")));
        }
        if self.study_seeds.is_empty() {
            return Err(Error::Config("study.seeds: empty list".into()));
        }
        Ok(())
    }

    /// Canonical text of every setting that affects results (the output
    /// directory excluded). Parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        match &self.data {
            DataSource::Synthetic(sc) => {
                for line in sc.to_text().lines().filter(|l| !l.starts_with("seed=")) {
                    let _ = writeln!(s, "synth.{line}");
                }
            }
            DataSource::Files { dataset, ddi } => {
                let _ = writeln!(s, "data.dataset={}", dataset.display());
                let _ = writeln!(s, "data.ddi={}", ddi.display());
            }
        }
        let st = &self.strat;
        let _ = writeln!(s, "strat.q_mm={}", st.q_mm);
        let _ = writeln!(s, "strat.q_md={}", st.q_md);
        let _ = writeln!(s, "strat.q_mp={}", st.q_mp);
        let _ = writeln!(s, "strat.k={}", st.k);
        let _ = writeln!(s, "strat.theta_fraction={}", st.theta_fraction);
        let _ = writeln!(s, "strat.rho_md={}", st.rho_md);
        let _ = writeln!(s, "strat.rho_mp={}", st.rho_mp);
        let h = &self.hyper;
        let _ = writeln!(s, "train.dim={}", h.dim);
        let _ = writeln!(s, "train.delta={}", h.delta);
        let _ = writeln!(s, "train.beta={}", h.beta);
        let _ = writeln!(s, "train.gamma={}", h.gamma);
        let _ = writeln!(s, "train.lr={}", h.lr);
        let _ = writeln!(s, "train.weight_decay={}", h.weight_decay);
        let _ = writeln!(s, "train.epochs={}", h.epochs);
        let _ = writeln!(s, "train.pretrain_epochs={}", self.pretrain_epochs);
        let _ = writeln!(s, "train.dropout={}", h.dropout);
        let a = self.ablation;
        let _ = writeln!(s, "ablation.wo_p={}", a.wo_p);
        let _ = writeln!(s, "ablation.wo_s={}", a.wo_s);
        let _ = writeln!(s, "ablation.wo_sg={}", a.wo_sg);
        let _ = writeln!(s, "bootstrap.rounds={}", self.bootstrap.rounds);
        let _ = writeln!(s, "bootstrap.fraction={}", self.bootstrap.fraction);
        let _ = writeln!(s, "study.levels={}", join(&self.levels));
        let _ = writeln!(s, "study.mus={}", join(&self.mus));
        let _ = writeln!(s, "study.seeds={}", join(&self.study_seeds));
        s
    }

    /// sha256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation.normalized()
    }
}
