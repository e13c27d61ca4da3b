//! Gated recurrent unit with the reset gate applied to the transformed
//! hidden state:
//!
//! ```text
//! r  = sigmoid(x Wxr + bxr + h Whr + bhr)
//! z  = sigmoid(x Wxz + bxz + h Whz + bhz)
//! n  = tanh(x Wxn + bxn + r * (h Whn + bhn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! The three gates are stored side by side in `[in x 3h]` / `[h x 3h]`
//! matrices in `(r, z, n)` order.

use super::INIT_RANGE;
use crate::numerics::{uniform_from, ParamId, ParamStore, Tape, Tensor, TensorError, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct GruLayer {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b_x: ParamId,
    pub b_h: ParamId,
    hidden: usize,
}

/// Parameters of a [`GruLayer`] bound onto one tape.
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    w_x: Var,
    w_h: Var,
    b_x: Var,
    b_h: Var,
}

impl GruLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> Self {
        let mut init = |suffix: &str, shape: [usize; 2]| {
            store.add(
                format!("{name}.{suffix}"),
                uniform_from(&shape, -INIT_RANGE, INIT_RANGE, rng),
            )
        };
        Self {
            w_x: init("w_x", [input, 3 * hidden]),
            w_h: init("w_h", [hidden, 3 * hidden]),
            b_x: init("b_x", [1, 3 * hidden]),
            b_h: init("b_h", [1, 3 * hidden]),
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> GruParams {
        GruParams {
            w_x: tape.param(store, self.w_x),
            w_h: tape.param(store, self.w_h),
            b_x: tape.param(store, self.b_x),
            b_h: tape.param(store, self.b_h),
        }
    }

    pub fn initial_state(&self, tape: &mut Tape) -> Var {
        tape.constant(Tensor::zeros(&[1, self.hidden]))
    }

    /// One cell update `h' = cell(x, h)` for `[1 x in]` input.
    pub fn step(&self, tape: &mut Tape, p: &GruParams, h: Var, x: Var) -> Result<Var, TensorError> {
        let gx = tape.matmul(x, p.w_x)?;
        let gx = tape.add_row(gx, p.b_x)?;
        let gh = tape.matmul(h, p.w_h)?;
        let gh = tape.add_row(gh, p.b_h)?;
        let [xr, xz, xn] = tape.split3(gx)?;
        let [hr, hz, hn] = tape.split3(gh)?;
        let r = tape.add(xr, hr)?;
        let r = tape.sigmoid(r)?;
        let z = tape.add(xz, hz)?;
        let z = tape.sigmoid(z)?;
        let rh = tape.mul(r, hn)?;
        let n = tape.add(xn, rh)?;
        let n = tape.tanh(n)?;
        let keep = tape.affine(z, -1.0, 1.0)?;
        let a = tape.mul(keep, n)?;
        let b = tape.mul(z, h)?;
        tape.add(a, b)
    }

    /// Hidden state after each element of `seq`, in order, from a zero state.
    pub fn forward_all(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        seq: &[Var],
    ) -> Result<Vec<Var>, TensorError> {
        if seq.is_empty() {
            return Err(TensorError::EmptyInput("gru"));
        }
        let p = self.bind(tape, store);
        let mut h = self.initial_state(tape);
        let mut out = Vec::with_capacity(seq.len());
        for &x in seq {
            h = self.step(tape, &p, h, x)?;
            out.push(h);
        }
        Ok(out)
    }

    /// Final hidden state after consuming `seq` chronologically.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        seq: &[Var],
    ) -> Result<Var, TensorError> {
        Ok(*self
            .forward_all(tape, store, seq)?
            .last()
            .expect("nonempty"))
    }
}
