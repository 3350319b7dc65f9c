//! Fully connected networks with ReLU hidden layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamVars, Params};
use super::tape::{Tape, Var};
use super::tensor::{vec_mat, Tensor};
use crate::error::{Error, Result};

/// Width of every hidden layer in actors, critics and the predictor.
pub const HIDDEN_UNITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    /// Unbounded scalar head (critics, logits).
    Linear,
    /// `tanh` squashing into (-1, 1) (actors).
    Tanh,
}

/// Affine layer `y = x W + b` with `W: [in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// Uniform fan-in initialization in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let weight = Tensor::matrix(input, output, draw(input * output)).expect("sized");
        let bias = Tensor::vector(draw(output));
        Dense { weight, bias }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense { weight: Tensor::zeros(&[input, output]), bias: Tensor::zeros(&[output]) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data().to_vec();
        vec_mat(x, &self.weight, &mut out);
        out
    }

    pub(crate) fn record_with(&self, tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
        debug_assert_eq!(tape.value(w).shape(), self.weight.shape());
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }
}

impl Params for Dense {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Multi-layer perceptron: ReLU on hidden layers, configurable output head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: OutputActivation,
        rng: &mut R,
    ) -> Self {
        let widths = Self::widths(input, hidden, output);
        let layers = widths.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Mlp { layers, output: activation }
    }

    /// The standard two-hidden-layer, 64-unit network.
    pub fn standard<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: OutputActivation,
        rng: &mut R,
    ) -> Self {
        Self::new(input, &[HIDDEN_UNITS, HIDDEN_UNITS], output, activation, rng)
    }

    pub fn zeros(input: usize, hidden: &[usize], output: usize, activation: OutputActivation) -> Self {
        let widths = Self::widths(input, hidden, output);
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Mlp { layers, output: activation }
    }

    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::dim("bias length differs from layer width"));
            }
        }
        Ok(Mlp { layers, output })
    }

    fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend_from_slice(hidden);
        w.push(output);
        w
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Layer widths `[input, hidden.., output]`.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(Dense::output_dim));
        w
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!("MLP input {} vs {}", x.len(), self.input_dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite MLP input".into()));
        }
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward_one(&h);
            if k < last {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        if self.output == OutputActivation::Tanh {
            h.iter_mut().for_each(|v| *v = v.tanh());
        }
        Ok(h)
    }

    /// Records a batched forward pass `[B, in] -> [B, out]` on `tape`,
    /// registering this network's parameters as leaves.
    pub fn record(&self, tape: &mut Tape, input: Var) -> Result<(Var, ParamVars)> {
        let vars = Params::record(self, tape)?;
        let out = self.record_with(tape, input, &vars)?;
        Ok((out, vars))
    }

    /// Like [`Mlp::record`] but reuses already-recorded parameter leaves.
    pub fn record_with(&self, tape: &mut Tape, input: Var, vars: &ParamVars) -> Result<Var> {
        let cols = tape.value(input).cols();
        if cols != self.input_dim() {
            return Err(Error::dim(format!("MLP input {} vs {}", cols, self.input_dim())));
        }
        let last = self.layers.len() - 1;
        let mut h = input;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.record_with(tape, h, vars.0[2 * k], vars.0[2 * k + 1])?;
            if k < last {
                h = tape.relu(h);
            }
        }
        if self.output == OutputActivation::Tanh {
            h = tape.tanh(h);
        }
        Ok(h)
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}

/// Batched forward pass: `input` is `[B, in]` (or a single `[in]` vector).
pub fn mlp_forward(params: &Mlp, input: &Tensor) -> Result<Tensor> {
    input.check_finite("MLP input")?;
    let batch = if input.shape().len() == 1 {
        Tensor::matrix(1, input.len(), input.data().to_vec())?
    } else {
        input.clone()
    };
    let mut tape = Tape::new();
    let x = tape.leaf(batch)?;
    let (y, _) = params.record(&mut tape, x)?;
    let out = tape.value(y).clone();
    if input.shape().len() == 1 {
        Ok(Tensor::vector(out.into_data()))
    } else {
        Ok(out)
    }
}
