//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation as it is evaluated. Calling
//! [`Tape::backward`] on a scalar node walks the recording in reverse and
//! returns the gradient of that scalar with respect to every node.

use super::tensor::{matmul, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    Square(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize, width: usize },
    Sum(Var),
    Mean(Var),
    /// Sum over rows of `-log softmax(logits)[label]`; keeps the softmax.
    SoftmaxXent { logits: Var, labels: Vec<usize>, probs: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; all zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}

fn same_shape(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::dim(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())))
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes checked by caller")
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a matrix.
pub(crate) fn softmax_rows(logits: &Tensor) -> Tensor {
    let cols = logits.cols();
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out).expect("same shape")
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input (parameter or constant). Non-finite values are
    /// rejected here so nothing downstream has to check.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        value.check_finite("tape input")?;
        Ok(self.push(value, Op::Leaf))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul(self.value(a), false, self.value(b), false)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Adds a `[F]` bias to every row of a `[B, F]` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let cols = xv.cols();
        if bv.len() != cols {
            return Err(Error::dim(format!("bias {} vs {} columns", bv.len(), cols)));
        }
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(cols) {
            for (r, b) in row.iter_mut().zip(bv.data()) {
                *r += b;
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddBias(x, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "sub")?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let value = zip_with(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x * k);
        self.push(value, Op::Scale(a, k))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square(a))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).rows(),
            None => return Err(Error::contract("concat of nothing")),
        };
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::dim(format!("concat rows {} vs {}", v.rows(), rows)));
            }
            cols += v.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let value = Tensor::matrix(rows, cols, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start + width` of a matrix.
    pub fn slice_cols(&mut self, src: Var, start: usize, width: usize) -> Result<Var> {
        let v = self.value(src);
        let cols = v.cols();
        if start + width > cols {
            return Err(Error::dim(format!("slice {start}+{width} of {cols} columns")));
        }
        let rows = v.rows();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&v.row_slice(r)[start..start + width]);
        }
        let value = Tensor::matrix(rows, width, data)?;
        Ok(self.push(value, Op::Slice { src, start, width }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let mean = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(mean), Op::Mean(a))
    }

    /// Cross-entropy of row-wise softmax against integer labels, summed over
    /// rows.
    pub fn softmax_xent(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != labels.len() {
            return Err(Error::dim(format!("{} labels for {} rows", labels.len(), lv.rows())));
        }
        let k = lv.cols();
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::contract(format!("label {bad} outside {k} classes")));
        }
        let probs = softmax_rows(lv);
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            // log-sum-exp form keeps saturated logits finite
            let row = lv.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
        }
        let op = Op::SoftmaxXent { logits, labels: labels.to_vec(), probs };
        Ok(self.push(Tensor::scalar(loss), op))
    }

    /// Gradients of the scalar `loss` with respect to every recorded node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    // leaves keep their gradient; interior ones are consumed
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let da = matmul(&g, false, self.value(*b), true)?;
                    let db = matmul(self.value(*a), true, &g, false)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(x, bias) => {
                    let cols = g.cols();
                    let mut db = vec![0.0; cols];
                    for row in g.data().chunks(cols) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let db = Tensor::new(self.value(*bias).shape().to_vec(), db)?;
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = zip_with(&g, self.value(*b), |x, y| x * y);
                    let db = zip_with(&g, self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Relu(a) => {
                    let d = zip_with(&g, self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = zip_with(&g, &node.value, |x, y| x * (1.0 - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = zip_with(&g, &node.value, |x, y| x * y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Scale(a, k) => {
                    let k = *k;
                    accumulate(&mut grads, *a, g.map(|x| x * k));
                }
                Op::Square(a) => {
                    let d = zip_with(&g, self.value(*a), |x, y| 2.0 * x * y);
                    accumulate(&mut grads, *a, d);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                        }
                        offset += w;
                        accumulate(&mut grads, p, Tensor::matrix(rows, w, data)?);
                    }
                }
                Op::Slice { src, start, width } => {
                    let sv = self.value(*src);
                    let (rows, cols) = (sv.rows(), sv.cols());
                    let mut data = vec![0.0; rows * cols];
                    for r in 0..rows {
                        data[r * cols + start..r * cols + start + width]
                            .copy_from_slice(g.row_slice(r));
                    }
                    accumulate(&mut grads, *src, Tensor::new(sv.shape().to_vec(), data)?);
                }
                Op::Sum(a) => {
                    let s = g.item();
                    let shape = self.value(*a).shape().to_vec();
                    accumulate(&mut grads, *a, Tensor::full(&shape, s));
                }
                Op::Mean(a) => {
                    let av = self.value(*a);
                    let s = g.item() / av.len() as f64;
                    accumulate(&mut grads, *a, Tensor::full(av.shape(), s));
                }
                Op::SoftmaxXent { logits, labels, probs } => {
                    let s = g.item();
                    let cols = probs.cols();
                    let mut d = probs.data().to_vec();
                    for (r, &label) in labels.iter().enumerate() {
                        d[r * cols + label] -= 1.0;
                    }
                    for v in d.iter_mut() {
                        *v *= s;
                    }
                    accumulate(&mut grads, *logits, Tensor::new(probs.shape().to_vec(), d)?);
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
