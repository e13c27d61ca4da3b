//! Run configuration, the cached stage pipeline, the experiment studies and
//! the per-visit case study.

mod case;
mod config;
mod pipeline;
mod studies;

pub use case::{case_study, CaseStudy};
pub use config::{parse_pairs, DataSource, RunConfig};
pub use pipeline::{
    load_data, pretrain_hyper, run_pipeline, stratify, train_variant, write_atomic,
    ExperimentManifest, PipelineOutput, Stage, StageRecord, Trained,
};
pub use studies::{
    distortion_study, robustness_study, study_variants, DistortionCell, DistortionRow,
    DistortionStudy, RobustnessCell, RobustnessRow, RobustnessStudy,
};
