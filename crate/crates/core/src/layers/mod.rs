//! Neural building blocks. Each layer owns [`ParamId`]s into a shared
//! [`ParamStore`] and records its computation on a [`Tape`].
//!
//! [`ParamId`]: crate::numerics::ParamId
//! [`ParamStore`]: crate::numerics::ParamStore
//! [`Tape`]: crate::numerics::Tape

mod embedding;
mod gcn;
mod gru;
mod linear;

pub use embedding::EmbeddingTable;
pub use gcn::{GcnMfLayer, GcnSwLayer};
pub use gru::{GruLayer, GruParams};
pub use linear::{Activation, LinearLayer};

use crate::numerics::{Tape, TensorError, Var};

/// Half-width of the uniform initialization range.
pub const INIT_RANGE: f64 = 0.1;

/// Row mean `[n x d] -> [1 x d]`; the zero vector when `n = 0`.
pub fn aggregate_mean(tape: &mut Tape, rows: Var) -> Result<Var, TensorError> {
    tape.row_mean(rows)
}
