use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A container of trainable tensors with a fixed, stable ordering.
///
/// Optimizers, target-network updates, gradient containers and the
/// checkpoint codec all walk parameters through this ordering.
pub trait Params {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Records every tensor as a tape leaf, in container order.
    fn record(&self, tape: &mut Tape) -> Result<ParamVars> {
        let mut vars = Vec::new();
        for t in self.tensors() {
            vars.push(tape.leaf(t.clone())?);
        }
        Ok(ParamVars(vars))
    }
}

/// Tape handles for a parameter container, in container order.
#[derive(Debug, Clone)]
pub struct ParamVars(pub Vec<Var>);

impl ParamVars {
    pub fn grads(&self, g: &Gradients) -> Grads {
        Grads { tensors: self.0.iter().map(|&v| g.get(v)).collect() }
    }
}

/// Gradients shaped like the container they were taken against.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    tensors: Vec<Tensor>,
}

impl Grads {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Grads { tensors }
    }

    pub fn zeros_like<P: Params + ?Sized>(params: &P) -> Self {
        Grads { tensors: params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let k = max_norm / norm;
            for t in &mut self.tensors {
                for v in t.data_mut() {
                    *v *= k;
                }
            }
        }
    }

    pub fn check_congruent<P: Params + ?Sized>(&self, params: &P) -> Result<()> {
        let ps = params.tensors();
        if ps.len() != self.tensors.len()
            || ps.iter().zip(&self.tensors).any(|(p, g)| p.shape() != g.shape())
        {
            return Err(Error::dim("gradients are not congruent with parameters"));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for t in &self.tensors {
            t.check_finite("gradient")?;
        }
        Ok(())
    }
}

/// Polyak averaging: `target <- tau * source + (1 - tau) * target`.
pub fn soft_update<P: Params + ?Sized>(target: &mut P, source: &P, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::contract(format!("tau {tau} outside [0, 1]")));
    }
    let src = source.tensors();
    let mut dst = target.tensors_mut();
    if src.len() != dst.len() || src.iter().zip(dst.iter()).any(|(s, d)| s.shape() != d.shape()) {
        return Err(Error::dim("soft_update on incongruent containers"));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        for (dv, &sv) in d.data_mut().iter_mut().zip(s.data()) {
            *dv = tau * sv + (1.0 - tau) * *dv;
        }
    }
    Ok(())
}

/// Copies every tensor of `source` into `target`.
pub fn copy_params<P: Params + ?Sized>(target: &mut P, source: &P) -> Result<()> {
    soft_update(target, source, 1.0)
}
