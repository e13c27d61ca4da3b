use super::{Hyperparams, Recommender};
use crate::data::{EntityVocab, Visit};
use crate::layers::{Activation, EmbeddingTable, LinearLayer};
use crate::numerics::{ParamStore, Tape, TensorError, Var};
use crate::rng::{self, streams, Rng};

/// Entity-level prototype: summed diagnosis, procedure and previous-visit
/// medication embeddings, concatenated and mapped to per-medication
/// probabilities by one linear layer with relu, then a sigmoid.
#[derive(Debug, Clone)]
pub struct PretrainModel {
    pub params: ParamStore,
    pub e_d: EmbeddingTable,
    pub e_p: EmbeddingTable,
    pub e_m: EmbeddingTable,
    pub mlp: LinearLayer,
    pub hyper: Hyperparams,
    vocab: EntityVocab,
}

/// The concatenated entity sums `[1 x 3 dim]` for a visit given the
/// medications of the visit before it.
pub(crate) fn prime_representation(
    tape: &mut Tape,
    store: &ParamStore,
    tables: [&EmbeddingTable; 3],
    visit: &Visit,
    prev_meds: &[usize],
) -> Result<Var, TensorError> {
    let d = tables[0].sum_lookup(tape, store, visit.diag_ids())?;
    let p = tables[1].sum_lookup(tape, store, visit.proc_ids())?;
    let m = tables[2].sum_lookup(tape, store, prev_meds)?;
    tape.concat(&[d, p, m])
}

impl PretrainModel {
    pub fn new(vocab: EntityVocab, hyper: Hyperparams) -> Self {
        let mut r = rng::stream(hyper.seed, streams::PRETRAIN_INIT);
        let mut params = ParamStore::new();
        let dim = hyper.dim;
        let e_d = EmbeddingTable::new(&mut params, "emb.diag", vocab.num_diag, dim, &mut r);
        let e_p = EmbeddingTable::new(&mut params, "emb.proc", vocab.num_proc, dim, &mut r);
        let e_m = EmbeddingTable::new(&mut params, "emb.med", vocab.num_med, dim, &mut r);
        let mlp = LinearLayer::new(
            &mut params,
            "mlp1",
            3 * dim,
            vocab.num_med,
            Activation::Relu,
            hyper.dropout,
            &mut r,
        );
        Self {
            params,
            e_d,
            e_p,
            e_m,
            mlp,
            hyper,
            vocab,
        }
    }

    pub fn vocab(&self) -> EntityVocab {
        self.vocab
    }

    /// The visit representation before the output layer.
    pub fn representation(
        &self,
        tape: &mut Tape,
        visit: &Visit,
        prev_meds: &[usize],
    ) -> Result<Var, TensorError> {
        prime_representation(
            tape,
            &self.params,
            [&self.e_d, &self.e_p, &self.e_m],
            visit,
            prev_meds,
        )
    }

    /// `[1 x |M|]` probabilities; dropout is active when `rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        visit: &Visit,
        prev_meds: &[usize],
        rng: Option<&mut Rng>,
    ) -> Result<Var, TensorError> {
        let e = self.representation(tape, visit, prev_meds)?;
        let h = self.mlp.forward(tape, &self.params, e, rng)?;
        tape.sigmoid(h)
    }
}

impl Recommender for PretrainModel {
    fn num_med(&self) -> usize {
        self.vocab.num_med
    }

    fn threshold(&self) -> f64 {
        self.hyper.delta
    }

    fn predict_patient(&self, visits: &[Visit]) -> Result<Vec<Vec<f64>>, TensorError> {
        let mut out = Vec::with_capacity(visits.len());
        for (t, v) in visits.iter().enumerate() {
            let prev = if t == 0 {
                &[][..]
            } else {
                visits[t - 1].med_ids()
            };
            let mut tape = Tape::new();
            let p = self.forward(&mut tape, v, prev, None)?;
            out.push(tape.value(p).data().to_vec());
        }
        Ok(out)
    }
}
