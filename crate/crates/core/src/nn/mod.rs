//! Dense tensors, reverse-mode differentiation and the small networks built
//! on them.

mod lstm;
mod mlp;
mod optim;
mod params;
mod serialize;
mod tape;
mod tensor;

pub use lstm::{lstm_step, LstmCell};
pub use mlp::{mlp_forward, Dense, Mlp, OutputActivation, HIDDEN_UNITS};
pub use optim::{Adam, AdamConfig};
pub use params::{copy_params, soft_update, Grads, ParamVars, Params};
pub use serialize::{decode_params_into, decode_tensors, encode_params, PARAM_MAGIC, PARAM_VERSION};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::softmax_rows;

/// Applies one optimizer step, optionally clipping the global gradient norm.
pub fn optimizer_step<P: Params + ?Sized>(
    opt: &mut Adam,
    params: &mut P,
    mut grads: Grads,
    clip: Option<f64>,
) -> crate::Result<()> {
    grads.check_finite()?;
    if let Some(max) = clip {
        grads.clip_norm(max);
    }
    opt.apply(params, &grads)
}
