//! A single LSTM layer.
//!
//! Gate pre-activations are packed column-wise in the order
//! input, forget, candidate, output:
//! `z = x W_x + h W_h + b`, `c' = f * c + i * g`, `h' = o * tanh(c')`.

use rand::Rng;

use super::params::{ParamVars, Params};
use super::tape::{sigmoid, Tape, Var};
use super::tensor::{matmul, vec_mat, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `[input, 4 * hidden]`
    pub w_input: Tensor,
    /// `[hidden, 4 * hidden]`
    pub w_hidden: Tensor,
    /// `[4 * hidden]`
    pub bias: Tensor,
}

impl LstmCell {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        LstmCell {
            w_input: Tensor::matrix(input, 4 * hidden, draw(input * 4 * hidden)).expect("sized"),
            w_hidden: Tensor::matrix(hidden, 4 * hidden, draw(hidden * 4 * hidden)).expect("sized"),
            bias: Tensor::vector(draw(4 * hidden)),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            w_input: Tensor::zeros(&[input, 4 * hidden]),
            w_hidden: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn from_parts(w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Result<Self> {
        let hidden = w_hidden.rows();
        if w_hidden.cols() != 4 * hidden || w_input.cols() != 4 * hidden || bias.len() != 4 * hidden {
            return Err(Error::dim("LSTM gate matrices are inconsistent with the hidden size"));
        }
        Ok(LstmCell { w_input, w_hidden, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.rows()
    }

    /// Single-sample step on plain slices; returns `(h, c)`.
    pub fn step_one(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let hd = self.hidden_dim();
        if x.len() != self.input_dim() || h_prev.len() != hd || c_prev.len() != hd {
            return Err(Error::dim(format!(
                "LSTM step: x {} (want {}), h {} / c {} (want {hd})",
                x.len(),
                self.input_dim(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let mut z = self.bias.data().to_vec();
        vec_mat(x, &self.w_input, &mut z);
        vec_mat(h_prev, &self.w_hidden, &mut z);
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for k in 0..hd {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hd + k]);
            let g = z[2 * hd + k].tanh();
            let o = sigmoid(z[3 * hd + k]);
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        Ok((h, c))
    }

    /// Records one batched step; `x: [B, in]`, `h, c: [B, hidden]`.
    pub fn record_step(&self, tape: &mut Tape, vars: &ParamVars, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hd = self.hidden_dim();
        let (wx, wh, b) = (vars.0[0], vars.0[1], vars.0[2]);
        let zx = tape.matmul(x, wx)?;
        let zh = tape.matmul(h, wh)?;
        let z = tape.add(zx, zh)?;
        let z = tape.add_bias(z, b)?;
        let zi = tape.slice_cols(z, 0, hd)?;
        let zf = tape.slice_cols(z, hd, hd)?;
        let zg = tape.slice_cols(z, 2 * hd, hd)?;
        let zo = tape.slice_cols(z, 3 * hd, hd)?;
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

impl Params for LstmCell {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

fn as_batch(t: &Tensor) -> Result<Tensor> {
    if t.shape().len() == 1 {
        Tensor::matrix(1, t.len(), t.data().to_vec())
    } else {
        Ok(t.clone())
    }
}

/// One LSTM recurrence on tensors (vectors or `[B, _]` batches).
pub fn lstm_step(cell: &LstmCell, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
    let hd = cell.hidden_dim();
    let (xb, hb, cb) = (as_batch(x)?, as_batch(h_prev)?, as_batch(c_prev)?);
    if xb.cols() != cell.input_dim() || hb.cols() != hd || cb.cols() != hd {
        return Err(Error::dim("LSTM step shapes inconsistent with parameters"));
    }
    if xb.rows() != hb.rows() || hb.rows() != cb.rows() {
        return Err(Error::dim("LSTM step batch sizes differ"));
    }
    let rows = xb.rows();
    let zx = matmul(&xb, false, &cell.w_input, false)?;
    let zh = matmul(&hb, false, &cell.w_hidden, false)?;
    let mut h = Vec::with_capacity(rows * hd);
    let mut c = Vec::with_capacity(rows * hd);
    for r in 0..rows {
        let (zxr, zhr, cr) = (zx.row_slice(r), zh.row_slice(r), cb.row_slice(r));
        let z = |j: usize| zxr[j] + zhr[j] + cell.bias.data()[j];
        for k in 0..hd {
            let i = sigmoid(z(k));
            let f = sigmoid(z(hd + k));
            let g = z(2 * hd + k).tanh();
            let o = sigmoid(z(3 * hd + k));
            let cn = f * cr[k] + i * g;
            c.push(cn);
            h.push(o * cn.tanh());
        }
    }
    let shape = if x.shape().len() == 1 { vec![hd] } else { vec![rows, hd] };
    Ok((Tensor::new(shape.clone(), h)?, Tensor::new(shape, c)?))
}
