//! Medication recommendation over longitudinal EHR visits with relevance
//! stratification of long-tailed co-occurrence statistics.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: visit/patient data model, file formats, the seeded synthetic
//!   generator and the dataset transformations used by the experiment
//!   protocols.
//! - [`strat`]: co-occurrence counting and the pyramid relevance buckets.
//! - [`numerics`]: dense tensors, a reverse-mode tape, Adam, checkpoints.
//! - [`layers`]: embeddings, linear, GRU and the two graph layers.
//! - [`model`]: the pre-training model, the main model, losses and training.
//! - [`eval`]: per-visit metrics and bootstrap evaluation.
//! - [`harness`]: configuration, the staged pipeline and experiment studies.

pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod strat;

pub use error::{Error, Result};
