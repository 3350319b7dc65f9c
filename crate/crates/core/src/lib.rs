//! Multi-agent deterministic actor-critic laboratory.
//!
//! * [`nn`]: tensors, reverse-mode differentiation, MLP/LSTM networks, Adam.
//! * [`env`]: deterministic 2-D particle worlds with wind and speed scenarios.
//! * [`replay`]: per-scenario transition buffers and per-agent episode buffers.
//! * [`algo`]: DDPG, MADDPG, M3DDPG and per-scenario policy-bank updates.
//! * [`predictor`]: the recurrent policy predictor and policy banks.
//! * [`harness`]: training drivers, cross-play evaluation, checkpoints, metrics.

pub mod algo;
pub mod codec;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod predictor;
pub mod replay;
pub mod rng;

pub use error::{Error, FormatError, Result};
