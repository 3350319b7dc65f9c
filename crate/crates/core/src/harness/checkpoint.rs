//! Versioned binary checkpoints.
//!
//! ```text
//! "MARLCKPT"  magic
//! u32         version
//! u8          flags (bit 0: training state follows the networks)
//! u8          method code
//! str         config snapshot (JSON)
//! u64         episodes completed
//! u64 x2      slots, agents; then every learner (networks, targets, Adam)
//! u64         predictors; then each predictor and its Adam state
//! [state]     rng, step counter, noise processes, replay buffers
//! ```

use std::path::Path;

use super::config::TrainerConfig;
use super::train::{Model, Trainer, TrainingState};
use crate::algo::NoiseProcess;
use crate::codec::{Decoder, Encoder};
use crate::error::{Error, FormatError, Result};
use crate::replay::{PredictorBuffer, TransitionBuffer};
use crate::rng::{decode_rng, encode_rng};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MARLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const FLAG_STATE: u8 = 1;

/// A decoded checkpoint; `state` is present for resumable checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub state: Option<TrainingState>,
}

impl Checkpoint {
    pub fn into_trainer(self) -> Result<Trainer> {
        match self.state {
            Some(state) => Ok(Trainer::from_parts(self.model, state)),
            None => Err(Error::contract("checkpoint holds no training state and cannot be resumed")),
        }
    }
}

pub fn encode_checkpoint(model: &Model, state: Option<&TrainingState>) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.raw(CHECKPOINT_MAGIC);
    enc.u32(CHECKPOINT_VERSION);
    enc.u8(if state.is_some() { FLAG_STATE } else { 0 });
    enc.u8(model.config.method.code());
    enc.str(&serde_json::to_string(&model.config).expect("config serializes"));
    enc.u64(model.episode as u64);
    enc.u64(model.learners.len() as u64);
    enc.u64(model.learners.first().map_or(0, |r| r.len()) as u64);
    for l in model.learners.iter().flatten() {
        l.encode(&mut enc);
    }
    enc.u64(model.predictors.len() as u64);
    for (p, opt) in model.predictors.iter().zip(&model.predictor_opts) {
        enc.params(p);
        enc.adam(opt);
    }
    if let Some(s) = state {
        encode_rng(&mut enc, &s.rng);
        enc.u64(s.steps);
        enc.u64(s.noise.len() as u64);
        for n in &s.noise {
            n.encode(&mut enc);
        }
        enc.u64(s.buffers.len() as u64);
        for b in &s.buffers {
            b.encode(&mut enc);
        }
        enc.u64(s.predictor_buffers.len() as u64);
        for b in &s.predictor_buffers {
            b.encode(&mut enc);
        }
    }
    enc.into_bytes()
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut dec = Decoder::new(bytes);
    if dec.raw(CHECKPOINT_MAGIC.len()).map_err(|_| FormatError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let version = dec.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::Version { found: version, expected: CHECKPOINT_VERSION }.into());
    }
    let flags = dec.u8()?;
    if flags & !FLAG_STATE != 0 {
        return Err(malformed(format!("unknown flags {flags:#x}")).into());
    }
    let method = dec.u8()?;
    let config: TrainerConfig =
        serde_json::from_str(&dec.str()?).map_err(|e| malformed(format!("config snapshot: {e}")))?;
    if config.method.code() != method {
        return Err(malformed("method tag disagrees with the config snapshot").into());
    }
    config.validate().map_err(|e| malformed(format!("config snapshot: {e}")))?;
    let mut model = Model::new(&config).map_err(|e| malformed(e.to_string()))?;
    model.episode = dec.usize()?;
    let (slots, agents) = (dec.usize()?, dec.usize()?);
    if slots != model.learners.len() || agents != model.num_agents() {
        return Err(malformed(format!("{slots}x{agents} learners do not match the config")).into());
    }
    for l in model.learners.iter_mut().flatten() {
        l.decode_into(&mut dec)?;
    }
    if dec.usize()? != model.predictors.len() {
        return Err(malformed("predictor count does not match the config").into());
    }
    for (p, opt) in model.predictors.iter_mut().zip(model.predictor_opts.iter_mut()) {
        dec.params_into(p)?;
        dec.adam_into(opt)?;
    }
    let state = if flags & FLAG_STATE != 0 {
        let fresh = TrainingState::new(&model.config).map_err(|e| malformed(e.to_string()))?;
        let rng = decode_rng(&mut dec)?;
        let steps = dec.u64()?;
        let count = dec.usize()?;
        if count != fresh.noise.len() {
            return Err(malformed("noise process count does not match the config").into());
        }
        let noise = (0..count).map(|_| NoiseProcess::decode(&mut dec)).collect::<std::result::Result<_, _>>()?;
        let count = dec.usize()?;
        if count != fresh.buffers.len() {
            return Err(malformed("replay buffer count does not match the config").into());
        }
        let buffers = (0..count).map(|_| TransitionBuffer::decode(&mut dec)).collect::<std::result::Result<_, _>>()?;
        let count = dec.usize()?;
        if count != fresh.predictor_buffers.len() {
            return Err(malformed("episode buffer count does not match the config").into());
        }
        let predictor_buffers =
            (0..count).map(|_| PredictorBuffer::decode(&mut dec)).collect::<std::result::Result<_, _>>()?;
        Some(TrainingState { rng, steps, noise, buffers, predictor_buffers })
    } else {
        None
    };
    dec.finish()?;
    Ok(Checkpoint { model, state })
}

impl Trainer {
    /// Resumable checkpoint: networks plus replay, rng and noise state.
    pub fn checkpoint(&self) -> Vec<u8> {
        encode_checkpoint(&self.model, Some(&self.state))
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Trainer> {
        decode_checkpoint(bytes)?.into_trainer()
    }
}

pub fn save_checkpoint(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
