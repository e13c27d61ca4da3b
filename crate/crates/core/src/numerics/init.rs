use rand::Rng as _;

use super::Tensor;
use crate::rng::{self, streams, Rng};

/// i.i.d. `U(lo, hi)` entries drawn from the init stream of `seed`.
pub fn uniform_init(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    uniform_from(shape, lo, hi, &mut rng::stream(seed, streams::INIT))
}

/// Like [`uniform_init`] but continuing an existing generator.
pub fn uniform_from(shape: &[usize], lo: f64, hi: f64, r: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| r.gen_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
