use super::pretrain::prime_representation;
use super::{Ablation, Hyperparams, Recommender};
use crate::data::{DdiMatrix, EntityVocab, Visit};
use crate::layers::{Activation, EmbeddingTable, GcnMfLayer, GcnSwLayer, GruLayer, LinearLayer};
use crate::numerics::{ParamStore, Tape, TensorError, Var};
use crate::rng::{self, streams, Rng};
use crate::strat::Buckets;

/// The main model. For every visit `s` of a history it builds
///
/// - `e_m(s-1)`: the safety graph over the medications of visit `s-1`,
/// - `e_d(s)`, `e_p(s)`: the mapping graphs from those medications onto the
///   diagnoses and procedures of visit `s`,
///
/// adds the entity-sum representation of the same visit as a residual, and
/// feeds the three thirds of the result to three GRUs whose final states are
/// concatenated and mapped to probabilities.
#[derive(Debug, Clone)]
pub struct StratMedModel {
    pub params: ParamStore,
    pub e_d: EmbeddingTable,
    pub e_p: EmbeddingTable,
    pub e_m: EmbeddingTable,
    pub sw: GcnSwLayer,
    pub mf_d: GcnMfLayer,
    pub mf_p: GcnMfLayer,
    pub rnn_d: GruLayer,
    pub rnn_p: GruLayer,
    pub rnn_m: GruLayer,
    pub mlp: LinearLayer,
    pub buckets: Buckets,
    pub ddi: DdiMatrix,
    pub hyper: Hyperparams,
    pub ablation: Ablation,
    vocab: EntityVocab,
}

impl StratMedModel {
    /// Builds a freshly initialized model. Under `wo_s` (or `wo_sg`) the given
    /// buckets are replaced by single-layer ones.
    pub fn new(
        vocab: EntityVocab,
        buckets: Buckets,
        ddi: DdiMatrix,
        hyper: Hyperparams,
        ablation: Ablation,
    ) -> Self {
        let ablation = ablation.normalized();
        let buckets = if ablation.wo_s {
            Buckets::unstratified(vocab.num_med, vocab.num_diag, vocab.num_proc)
        } else {
            buckets
        };
        let mut r = rng::stream(hyper.seed, streams::INIT);
        let mut params = ParamStore::new();
        let dim = hyper.dim;
        let e_d = EmbeddingTable::new(&mut params, "emb.diag", vocab.num_diag, dim, &mut r);
        let e_p = EmbeddingTable::new(&mut params, "emb.proc", vocab.num_proc, dim, &mut r);
        let e_m = EmbeddingTable::new(&mut params, "emb.med", vocab.num_med, dim, &mut r);
        let sw = GcnSwLayer::new(&mut params, "gcn_sw", &buckets.safety, dim, &mut r);
        let mf_d = GcnMfLayer::new(&mut params, "gcn_mf_diag", &buckets.diag, dim, &mut r);
        let mf_p = GcnMfLayer::new(&mut params, "gcn_mf_proc", &buckets.proc, dim, &mut r);
        let rnn_d = GruLayer::new(&mut params, "rnn_diag", dim, dim, &mut r);
        let rnn_p = GruLayer::new(&mut params, "rnn_proc", dim, dim, &mut r);
        let rnn_m = GruLayer::new(&mut params, "rnn_med", dim, dim, &mut r);
        let mlp = LinearLayer::new(
            &mut params,
            "mlp2",
            3 * dim,
            vocab.num_med,
            Activation::Sigmoid,
            hyper.dropout,
            &mut r,
        );
        Self {
            params,
            e_d,
            e_p,
            e_m,
            sw,
            mf_d,
            mf_p,
            rnn_d,
            rnn_p,
            rnn_m,
            mlp,
            buckets,
            ddi,
            hyper,
            ablation,
            vocab,
        }
    }

    pub fn vocab(&self) -> EntityVocab {
        self.vocab
    }

    /// Names of the parameters that belong to the graph layers.
    pub fn graph_param_names(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|p| p.name.starts_with("gcn_"))
            .map(|p| p.name.clone())
            .collect()
    }

    /// The graph representation `e_v(s)` of one visit (`[1 x 3 dim]`).
    fn graph_representation(
        &self,
        tape: &mut Tape,
        visit: &Visit,
        prev_meds: &[usize],
    ) -> Result<Var, TensorError> {
        let s = &self.params;
        let med_rows = self.e_m.lookup(tape, s, prev_meds)?;
        let (meds, e_m) = self.sw.forward(
            tape,
            s,
            prev_meds,
            med_rows,
            &self.buckets.safety,
            &self.ddi,
        )?;
        let diag_rows = self.e_d.lookup(tape, s, visit.diag_ids())?;
        let (_, e_d) = self.mf_d.forward(
            tape,
            s,
            prev_meds,
            meds,
            visit.diag_ids(),
            diag_rows,
            &self.buckets.diag,
        )?;
        let proc_rows = self.e_p.lookup(tape, s, visit.proc_ids())?;
        let (_, e_p) = self.mf_p.forward(
            tape,
            s,
            prev_meds,
            meds,
            visit.proc_ids(),
            proc_rows,
            &self.buckets.proc,
        )?;
        tape.concat(&[e_d, e_p, e_m])
    }

    /// `e''_v(s)`: graph representation plus the entity-sum residual, or the
    /// residual alone when the graph layers are bypassed.
    pub fn visit_representation(
        &self,
        tape: &mut Tape,
        visit: &Visit,
        prev_meds: &[usize],
    ) -> Result<Var, TensorError> {
        let prime = prime_representation(
            tape,
            &self.params,
            [&self.e_d, &self.e_p, &self.e_m],
            visit,
            prev_meds,
        )?;
        if self.ablation.wo_sg {
            return Ok(prime);
        }
        let graph = self.graph_representation(tape, visit, prev_meds)?;
        tape.add(graph, prime)
    }

    /// Patient states `[1 x 3 dim]` after each visit of `history`.
    fn states(&self, tape: &mut Tape, history: &[Visit]) -> Result<Vec<Var>, TensorError> {
        if history.is_empty() {
            return Err(TensorError::EmptyInput("history"));
        }
        let mut seqs: [Vec<Var>; 3] = Default::default();
        for (t, visit) in history.iter().enumerate() {
            let prev = if t == 0 {
                &[][..]
            } else {
                history[t - 1].med_ids()
            };
            let e = self.visit_representation(tape, visit, prev)?;
            let parts = tape.split3(e)?;
            for (seq, part) in seqs.iter_mut().zip(parts) {
                seq.push(part);
            }
        }
        let hd = self.rnn_d.forward_all(tape, &self.params, &seqs[0])?;
        let hp = self.rnn_p.forward_all(tape, &self.params, &seqs[1])?;
        let hm = self.rnn_m.forward_all(tape, &self.params, &seqs[2])?;
        (0..history.len())
            .map(|t| tape.concat(&[hd[t], hp[t], hm[t]]))
            .collect()
    }

    /// `[1 x |M|]` probabilities for the last visit of `history`; dropout is
    /// active when `rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        history: &[Visit],
        rng: Option<&mut Rng>,
    ) -> Result<Var, TensorError> {
        let states = self.states(tape, history)?;
        let last = *states.last().expect("nonempty");
        self.mlp.forward(tape, &self.params, last, rng)
    }
}

impl Recommender for StratMedModel {
    fn num_med(&self) -> usize {
        self.vocab.num_med
    }

    fn threshold(&self) -> f64 {
        self.hyper.delta
    }

    /// One pass over the full history; the state after visit `t` only
    /// depends on visits `..=t`, so every prefix is predicted at once.
    fn predict_patient(&self, visits: &[Visit]) -> Result<Vec<Vec<f64>>, TensorError> {
        let mut tape = Tape::new();
        let states = self.states(&mut tape, visits)?;
        let mut out = Vec::with_capacity(states.len());
        for h in states {
            let p = self.mlp.forward(&mut tape, &self.params, h, None)?;
            out.push(tape.value(p).data().to_vec());
        }
        Ok(out)
    }
}
