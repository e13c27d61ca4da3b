use super::INIT_RANGE;
use crate::numerics::{uniform_from, ParamId, ParamStore, Tape, TensorError, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct EmbeddingTable {
    pub weights: ParamId,
    rows: usize,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut Rng) -> Self {
        let weights = store.add(
            name,
            uniform_from(&[rows, dim], -INIT_RANGE, INIT_RANGE, rng),
        );
        Self { weights, rows, dim }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `[ids.len() x dim]`, one looked-up row per id.
    pub fn lookup(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<Var, TensorError> {
        tape.gather(store, self.weights, ids)
    }

    /// Multi-hot times table, i.e. the sum of the looked-up rows (`[1 x dim]`).
    pub fn sum_lookup(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<Var, TensorError> {
        let rows = self.lookup(tape, store, ids)?;
        tape.sum_rows(rows)
    }
}
