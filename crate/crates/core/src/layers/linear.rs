use serde::{Deserialize, Serialize};

use super::INIT_RANGE;
use crate::numerics::{uniform_from, ParamId, ParamStore, Tape, TensorError, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub dropout: f64,
}

impl LinearLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            uniform_from(&[input, output], -INIT_RANGE, INIT_RANGE, rng),
        );
        let bias = store.add(
            format!("{name}.bias"),
            uniform_from(&[1, output], -INIT_RANGE, INIT_RANGE, rng),
        );
        Self {
            weight,
            bias,
            activation,
            dropout,
        }
    }

    /// `activation(dropout(x) W + b)`. Dropout applies only when an RNG is
    /// supplied (training).
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        rng: Option<&mut Rng>,
    ) -> Result<Var, TensorError> {
        let x = tape.dropout(x, self.dropout, rng)?;
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        let y = tape.add_row(xw, b)?;
        match self.activation {
            Activation::None => Ok(y),
            Activation::Relu => tape.relu(y),
            Activation::Sigmoid => tape.sigmoid(y),
        }
    }
}
