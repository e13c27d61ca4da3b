//! The two single-layer graph networks.
//!
//! `GcnSwLayer` runs over the complete graph of one visit's medications.
//! Edge `(i, j)` weighs `w[layer(i, j)] - lambda * ddi(i, j)`, where `w` holds
//! one learnable scalar per safety layer, and node `j` updates to
//! `relu(e_j W + mean_{i != j} w_ij e_i W)`.
//!
//! `GcnMfLayer` runs over the bipartite graph from medications to diagnoses
//! (or procedures), keeping only pairs the mapping bucket did not erase. The
//! message along an edge is `(e_med * F[layer]) W`, with `F` one learnable
//! vector per mapping layer, and a target updates to the `relu` of the mean of
//! its incoming messages. Targets without incoming edges keep their input
//! embedding.

use super::INIT_RANGE;
use crate::data::DdiMatrix;
use crate::numerics::{uniform_from, ParamId, ParamStore, Tape, Tensor, TensorError, Var};
use crate::rng::Rng;
use crate::strat::RelevanceBucket;

#[derive(Debug, Clone, Copy)]
pub struct GcnSwLayer {
    /// `[layers x 1]`, initialized to the layer relevances.
    pub edge_weights: ParamId,
    /// Scalar DDI penalty.
    pub lambda: ParamId,
    pub transform: ParamId,
    dim: usize,
}

impl GcnSwLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        bucket: &RelevanceBucket,
        dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let rel = bucket.relevances();
        let edge_weights = store.add(
            format!("{name}.edge_weights"),
            Tensor::new(vec![rel.len(), 1], rel.to_vec()).expect("column"),
        );
        let lambda = store.add(format!("{name}.lambda"), Tensor::scalar(0.0));
        let transform = store.add(
            format!("{name}.transform"),
            uniform_from(&[dim, dim], -INIT_RANGE, INIT_RANGE, rng),
        );
        Self {
            edge_weights,
            lambda,
            transform,
            dim,
        }
    }

    /// Updated medication embeddings `[n x dim]` and their mean `[1 x dim]`.
    /// `meds` holds the embeddings of `med_ids`, one row each.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        med_ids: &[usize],
        meds: Var,
        bucket: &RelevanceBucket,
        ddi: &DdiMatrix,
    ) -> Result<(Var, Var), TensorError> {
        let n = med_ids.len();
        if n == 0 {
            let empty = tape.constant(Tensor::zeros(&[0, self.dim]));
            let zero = tape.constant(Tensor::zeros(&[1, self.dim]));
            return Ok((empty, zero));
        }
        let w = tape.param(store, self.transform);
        let xw = tape.matmul(meds, w)?;
        let pre = if n == 1 {
            xw
        } else {
            let inv = 1.0 / (n - 1) as f64;
            let mut layers = Vec::with_capacity(n * n);
            let mut mask = vec![0.0; n * n];
            let mut penalty = vec![0.0; n * n];
            for (a, &i) in med_ids.iter().enumerate() {
                for (b, &j) in med_ids.iter().enumerate() {
                    let layer = bucket.layer_index(i, j);
                    layers.push(layer.unwrap_or(0));
                    if a != b && layer.is_some() {
                        mask[a * n + b] = inv;
                        if ddi.get(i, j) {
                            penalty[a * n + b] = inv;
                        }
                    }
                }
            }
            let g = tape.gather(store, self.edge_weights, &layers)?;
            let g = tape.reshape(g, &[n, n])?;
            let mask = tape.constant(Tensor::new(vec![n, n], mask)?);
            let g = tape.mul(g, mask)?;
            let lambda = tape.param(store, self.lambda);
            let penalty = tape.constant(Tensor::new(vec![n, n], penalty)?);
            let penalty = tape.scale_by(lambda, penalty)?;
            let a = tape.sub(g, penalty)?;
            // message into j sums over sources i: A^T (X W)
            let at = tape.transpose(a)?;
            let msg = tape.matmul(at, xw)?;
            tape.add(xw, msg)?
        };
        let updated = tape.relu(pre)?;
        let mean = tape.row_mean(updated)?;
        Ok((updated, mean))
    }

    /// The edge weight `w_ij` used for an in-visit pair, from current values.
    pub fn edge_weight(
        &self,
        store: &ParamStore,
        bucket: &RelevanceBucket,
        ddi: &DdiMatrix,
        i: usize,
        j: usize,
    ) -> f64 {
        let table = &store.get(self.edge_weights).value;
        let base = bucket.layer_index(i, j).map_or(0.0, |l| table.data()[l]);
        let lambda = store.get(self.lambda).value.item();
        base - if ddi.get(i, j) { lambda } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GcnMfLayer {
    /// `[layers x dim]`, row `l` initialized to relevance `l` in every column.
    pub edge_features: ParamId,
    pub transform: ParamId,
    dim: usize,
}

impl GcnMfLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        bucket: &RelevanceBucket,
        dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let rel = bucket.relevances();
        let data = rel
            .iter()
            .flat_map(|&r| std::iter::repeat_n(r, dim))
            .collect();
        let edge_features = store.add(
            format!("{name}.edge_features"),
            Tensor::new(vec![rel.len(), dim], data).expect("rows of dim"),
        );
        let transform = store.add(
            format!("{name}.transform"),
            uniform_from(&[dim, dim], -INIT_RANGE, INIT_RANGE, rng),
        );
        Self {
            edge_features,
            transform,
            dim,
        }
    }

    /// Updated target embeddings `[k x dim]` and their mean `[1 x dim]`.
    /// `meds` / `targets` hold one embedding row per id.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        med_ids: &[usize],
        meds: Var,
        target_ids: &[usize],
        targets: Var,
        bucket: &RelevanceBucket,
    ) -> Result<(Var, Var), TensorError> {
        let (n, k) = (med_ids.len(), target_ids.len());
        // edges as (target position, med position, layer)
        let mut edges = Vec::new();
        let mut degree = vec![0usize; k];
        for (t, &target) in target_ids.iter().enumerate() {
            for (m, &med) in med_ids.iter().enumerate() {
                if let Some(l) = bucket.layer_index(med, target) {
                    edges.push((t, m, l));
                    degree[t] += 1;
                }
            }
        }
        if edges.is_empty() {
            let mean = tape.row_mean(targets)?;
            return Ok((targets, mean));
        }
        let e = edges.len();
        let mut select = vec![0.0; e * n];
        let mut agg = vec![0.0; k * e];
        let mut layers = Vec::with_capacity(e);
        for (idx, &(t, m, l)) in edges.iter().enumerate() {
            select[idx * n + m] = 1.0;
            agg[t * e + idx] = 1.0 / degree[t] as f64;
            layers.push(l);
        }
        let select = tape.constant(Tensor::new(vec![e, n], select)?);
        let sources = tape.matmul(select, meds)?;
        let features = tape.gather(store, self.edge_features, &layers)?;
        let modulated = tape.mul(sources, features)?;
        let agg = tape.constant(Tensor::new(vec![k, e], agg)?);
        let pooled = tape.matmul(agg, modulated)?;
        let w = tape.param(store, self.transform);
        let msg = tape.matmul(pooled, w)?;
        let mut updated = tape.relu(msg)?;
        if degree.contains(&0) {
            let keep: Vec<f64> = degree
                .iter()
                .flat_map(|&d| std::iter::repeat_n(if d == 0 { 1.0 } else { 0.0 }, self.dim))
                .collect();
            let take: Vec<f64> = keep.iter().map(|x| 1.0 - x).collect();
            let keep = tape.constant(Tensor::new(vec![k, self.dim], keep)?);
            let take = tape.constant(Tensor::new(vec![k, self.dim], take)?);
            let a = tape.mul(updated, take)?;
            let b = tape.mul(targets, keep)?;
            updated = tape.add(a, b)?;
        }
        let mean = tape.row_mean(updated)?;
        Ok((updated, mean))
    }
}
