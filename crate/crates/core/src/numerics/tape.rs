//! Reverse-mode tape.
//!
//! Every operation appends a node holding its output value and the ids of
//! its inputs. Inputs always precede outputs, so walking the node list
//! backwards is a reverse topological order and each node is visited once.

use rand::Rng as _;

use super::{ParamId, ParamStore, Tensor, TensorError};
use crate::rng::Rng;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Gather { param: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    ScaleBy { s: Var, x: Var },
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    RowMean(Var),
    SumRows(Var),
    Sum(Var),
    Reshape(Var),
    Transpose(Var),
    Dropout { x: Var, mask: Vec<f64> },
    ScalarFn { x: Var, grad: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn unary(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect()).expect("same shape")
}

fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .expect("same shape")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
        });
        Var(self.nodes.len() - 1)
    }

    /// A parameter leaf; gradients flow back into the store on `backward`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.get(id).value.clone(),
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Rows `ids` of a rank-2 parameter, `[ids.len() x cols]`.
    pub fn gather(
        &mut self,
        store: &ParamStore,
        id: ParamId,
        ids: &[usize],
    ) -> Result<Var, TensorError> {
        let table = &store.get(id).value;
        let cols = table.cols();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &r in ids {
            if r >= table.rows() {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather",
                    index: r,
                    bound: table.rows(),
                });
            }
            data.extend_from_slice(table.row_slice(r));
        }
        let value = Tensor::new(vec![ids.len(), cols], data)?;
        self.push(
            "gather",
            value,
            Op::Gather {
                param: id,
                rows: ids.to_vec(),
            },
        )
    }

    /// `[n x k] . [k x m] -> [n x m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = Tensor::matmul_raw(ta, tb);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("add", ta, tb));
        }
        let out = binary(ta, tb, |x, y| x + y);
        self.push("add", out, Op::Add(a, b))
    }

    /// Adds a `[1 x d]` row to every row of `[n x d]`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (ta, tr) = (self.value(a), self.value(row));
        if ta.rank() != 2 || tr.shape() != [1, ta.cols()] {
            return Err(mismatch("add_row", ta, tr));
        }
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + tr.data()[i % c])
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push("add_row", out, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("sub", ta, tb));
        }
        let out = binary(ta, tb, |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("mul", ta, tb));
        }
        let out = binary(ta, tb, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var, TensorError> {
        let out = unary(self.value(x), |v| scale * v + shift);
        self.push("affine", out, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        let out = unary(self.value(x), |v| c * v);
        self.push("scale", out, Op::Affine { x, scale: c })
    }

    /// Multiplies every element of `x` by the scalar variable `s`.
    pub fn scale_by(&mut self, s: Var, x: Var) -> Result<Var, TensorError> {
        let ts = self.value(s);
        if !ts.is_scalar() {
            return Err(mismatch("scale_by", ts, self.value(x)));
        }
        let c = ts.item();
        let out = unary(self.value(x), |v| c * v);
        self.push("scale_by", out, Op::ScaleBy { s, x })
    }

    /// Concatenates rank-2 tensors with equal row counts along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = self.value(parts[0]);
        let rows = first.rows();
        for &p in &parts[1..] {
            let t = self.value(p);
            if t.rank() != 2 || t.rows() != rows {
                return Err(mismatch("concat", first, t));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        self.push("concat", out, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let t = self.value(x);
        if t.rank() != 2 || start + len > t.cols() {
            return Err(TensorError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                bound: t.cols(),
            });
        }
        let mut data = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..start + len]);
        }
        let out = Tensor::new(vec![t.rows(), len], data)?;
        self.push("slice_cols", out, Op::SliceCols { x, start })
    }

    /// Splits the last axis into three equal parts.
    pub fn split3(&mut self, x: Var) -> Result<[Var; 3], TensorError> {
        let c = self.value(x).cols();
        if !c.is_multiple_of(3) {
            return Err(TensorError::ShapeMismatch {
                op: "split3",
                left: self.value(x).shape().to_vec(),
                right: vec![3],
            });
        }
        let w = c / 3;
        Ok([
            self.slice_cols(x, 0, w)?,
            self.slice_cols(x, w, w)?,
            self.slice_cols(x, 2 * w, w)?,
        ])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = unary(self.value(x), |v| v.max(0.0));
        self.push("relu", out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = unary(self.value(x), sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = unary(self.value(x), f64::tanh);
        self.push("tanh", out, Op::Tanh(x))
    }

    /// Mean over rows, `[n x d] -> [1 x d]`; zero rows give the zero vector.
    pub fn row_mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let t = self.value(x);
        let (n, d) = (t.rows(), t.cols());
        let mut out = vec![0.0; d];
        for r in 0..n {
            for (o, v) in out.iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        if n > 0 {
            out.iter_mut().for_each(|o| *o /= n as f64);
        }
        self.push("row_mean", Tensor::row(out), Op::RowMean(x))
    }

    /// Sum over rows, `[n x d] -> [1 x d]`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let t = self.value(x);
        let mut out = vec![0.0; t.cols()];
        for r in 0..t.rows() {
            for (o, v) in out.iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        self.push("sum_rows", Tensor::row(out), Op::SumRows(x))
    }

    /// Sum of all elements, `[1 x 1]`.
    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(x);
        if shape.iter().product::<usize>() != t.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: t.shape().to_vec(),
                right: shape.to_vec(),
            });
        }
        let out = t.clone().reshaped(shape.to_vec());
        self.push("reshape", out, Op::Reshape(x))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.value(x).transpose();
        self.push("transpose", out, Op::Transpose(x))
    }

    /// Inverted dropout: with an RNG (train mode) each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`; without an
    /// RNG (eval mode) this is the identity and records nothing.
    pub fn dropout(&mut self, x: Var, p: f64, rng: Option<&mut Rng>) -> Result<Var, TensorError> {
        let Some(rng) = rng else {
            return Ok(x);
        };
        if p <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out = Tensor::new(
            t.shape().to_vec(),
            t.data().iter().zip(&mask).map(|(v, m)| v * m).collect(),
        )?;
        self.push("dropout", out, Op::Dropout { x, mask })
    }

    /// A scalar function of `x` evaluated outside the tape, given its value
    /// and its gradient with respect to `x`.
    pub fn scalar_fn(&mut self, x: Var, value: f64, grad: Tensor) -> Result<Var, TensorError> {
        if grad.shape() != self.value(x).shape() {
            return Err(mismatch("scalar_fn", self.value(x), &grad));
        }
        if !grad.all_finite() {
            return Err(TensorError::NonFinite { op: "scalar_fn" });
        }
        self.push("scalar_fn", Tensor::scalar(value), Op::ScalarFn { x, grad })
    }

    /// Back-propagates from the scalar `loss`, accumulating (`+=`) parameter
    /// gradients into `store`. A tape can be consumed once.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<(), TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        let shape = self.value(loss).shape().to_vec();
        if !self.value(loss).is_scalar() {
            return Err(TensorError::NonScalarLoss(shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(&shape, 1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.get_mut(*id).grad.add_assign(&g),
                Op::Gather { param, rows } => {
                    let pg = &mut store.get_mut(*param).grad;
                    let cols = pg.cols();
                    let data = pg.data_mut();
                    for (i, &r) in rows.iter().enumerate() {
                        for c in 0..cols {
                            data[r * cols + c] += g.data()[i * cols + c];
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let ta = &self.nodes[a.0].value;
                    let tb = &self.nodes[b.0].value;
                    let ga = Tensor::matmul_raw(&g, &tb.transpose());
                    let gb = Tensor::matmul_raw(&ta.transpose(), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, r) => {
                    let c = g.cols();
                    let mut gr = vec![0.0; c];
                    for (i, v) in g.data().iter().enumerate() {
                        gr[i % c] += v;
                    }
                    acc(&mut grads, *r, Tensor::row(gr));
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, unary(&g, |v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = binary(&g, &self.nodes[b.0].value, |x, y| x * y);
                    let gb = binary(&g, &self.nodes[a.0].value, |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Affine { x, scale } => {
                    let s = *scale;
                    acc(&mut grads, *x, unary(&g, |v| s * v));
                }
                Op::ScaleBy { s, x } => {
                    let c = self.nodes[s.0].value.item();
                    let tx = &self.nodes[x.0].value;
                    let gs: f64 = g.data().iter().zip(tx.data()).map(|(a, b)| a * b).sum();
                    let gs_t = Tensor::new(self.nodes[s.0].value.shape().to_vec(), vec![gs])?;
                    acc(&mut grads, *x, unary(&g, |v| c * v));
                    acc(&mut grads, *s, gs_t);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p.0].value.cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(
                                &g.data()[r * total + offset..r * total + offset + w],
                            );
                        }
                        acc(&mut grads, p, Tensor::new(vec![rows, w], data)?);
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let tx = &self.nodes[x.0].value;
                    let (rows, cols, w) = (tx.rows(), tx.cols(), g.cols());
                    let mut gx = Tensor::zeros(tx.shape());
                    let data = gx.data_mut();
                    for r in 0..rows {
                        data[r * cols + start..r * cols + start + w]
                            .copy_from_slice(&g.data()[r * w..(r + 1) * w]);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let gx = binary(&g, &node.value, |gv, y| if y > 0.0 { gv } else { 0.0 });
                    acc(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let gx = binary(&g, &node.value, |gv, y| gv * y * (1.0 - y));
                    acc(&mut grads, *x, gx);
                }
                Op::Tanh(x) => {
                    let gx = binary(&g, &node.value, |gv, y| gv * (1.0 - y * y));
                    acc(&mut grads, *x, gx);
                }
                Op::RowMean(x) => {
                    let tx = &self.nodes[x.0].value;
                    let n = tx.rows();
                    if n > 0 {
                        let inv = 1.0 / n as f64;
                        let data = (0..n)
                            .flat_map(|_| g.data().iter().map(move |v| v * inv))
                            .collect();
                        acc(&mut grads, *x, Tensor::new(tx.shape().to_vec(), data)?);
                    }
                }
                Op::SumRows(x) => {
                    let tx = &self.nodes[x.0].value;
                    let data = (0..tx.rows())
                        .flat_map(|_| g.data().iter().copied())
                        .collect();
                    acc(&mut grads, *x, Tensor::new(tx.shape().to_vec(), data)?);
                }
                Op::Sum(x) => {
                    let tx = &self.nodes[x.0].value;
                    acc(&mut grads, *x, Tensor::full(tx.shape(), g.item()));
                }
                Op::Reshape(x) => {
                    let shape = self.nodes[x.0].value.shape().to_vec();
                    acc(&mut grads, *x, g.reshaped(shape));
                }
                Op::Transpose(x) => acc(&mut grads, *x, g.transpose()),
                Op::Dropout { x, mask } => {
                    let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                    acc(&mut grads, *x, Tensor::new(g.shape().to_vec(), data)?);
                }
                Op::ScalarFn { x, grad } => {
                    let s = g.item();
                    acc(&mut grads, *x, unary(grad, |v| s * v));
                }
            }
        }
        Ok(())
    }
}
