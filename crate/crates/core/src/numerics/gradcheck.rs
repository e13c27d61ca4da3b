use rand::seq::index::sample;

use super::{ParamStore, Tape, TensorError, Var};
use crate::rng::{self, streams};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Central-difference step.
    pub step: f64,
    /// Coordinates checked per parameter (sampled when the tensor is larger).
    pub max_per_param: usize,
    /// Denominator floor so near-zero gradients are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            step: 1e-6,
            max_per_param: 20,
            floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub passed: bool,
}

/// Compares analytic gradients of the scalar built by `f` against central
/// finite differences. Existing gradient buffers are cleared first and left
/// holding the analytic gradient.
pub fn grad_check<F>(
    store: &mut ParamStore,
    f: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var), TensorError>,
{
    store.zero_grads();
    let (mut tape, out) = f(store)?;
    tape.backward(out, store)?;
    let eval = |s: &ParamStore| -> Result<f64, TensorError> {
        let (t, v) = f(s)?;
        Ok(t.value(v).item())
    };
    let mut r = rng::stream(opts.seed, streams::GRAD_CHECK);
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).value.numel();
        let coords: Vec<usize> = if n <= opts.max_per_param {
            (0..n).collect()
        } else {
            sample(&mut r, n, opts.max_per_param).into_vec()
        };
        for k in coords {
            let analytic = store.get(id).grad.data()[k];
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + opts.step;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - opts.step;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let denom = analytic.abs().max(numeric.abs()).max(opts.floor);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked,
        passed: max_rel <= opts.tolerance,
    })
}
