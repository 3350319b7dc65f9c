//! Standalone parameter files.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! 8 bytes   magic "MARLPARM"
//! u32       format version (1)
//! u32       tensor count n
//! n x       { u8 rank, rank x u32 dim }      shape table
//! ...       f64 values of every tensor, in table order, row-major
//! ```

use super::params::Params;
use super::tensor::Tensor;
use crate::codec::{Decoder, Encoder};
use crate::error::FormatError;

pub const PARAM_MAGIC: &[u8; 8] = b"MARLPARM";
pub const PARAM_VERSION: u32 = 1;

pub fn encode_params<P: Params + ?Sized>(params: &P) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.raw(PARAM_MAGIC);
    enc.u32(PARAM_VERSION);
    enc.params(params);
    enc.into_bytes()
}

/// Decodes the tensors of a parameter file.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>, FormatError> {
    let mut dec = Decoder::new(bytes);
    if dec.raw(8).map_err(|_| FormatError::BadMagic)? != PARAM_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = dec.u32()?;
    if version != PARAM_VERSION {
        return Err(FormatError::Version { found: version, expected: PARAM_VERSION });
    }
    let tensors = dec.tensors()?;
    dec.finish()?;
    Ok(tensors)
}

/// Decodes a parameter file into `params`, which fixes the expected shapes.
pub fn decode_params_into<P: Params + ?Sized>(bytes: &[u8], params: &mut P) -> Result<(), FormatError> {
    let tensors = decode_tensors(bytes)?;
    let mut enc = Encoder::new();
    enc.tensors(tensors.iter());
    let block = enc.into_bytes();
    Decoder::new(&block).params_into(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, OutputActivation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::standard(6, 2, OutputActivation::Tanh, &mut rng);
        let bytes = encode_params(&net);
        let mut other = Mlp::zeros(6, &[64, 64], 2, OutputActivation::Tanh);
        decode_params_into(&bytes, &mut other).unwrap();
        assert_eq!(net, other);
        assert_eq!(encode_params(&other), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let net = Mlp::zeros(2, &[3], 1, OutputActivation::Linear);
        let mut bytes = encode_params(&net);
        assert_eq!(decode_tensors(&bytes[..bytes.len() - 3]), Err(FormatError::Truncated));
        bytes[8] = 9;
        assert!(matches!(decode_tensors(&bytes), Err(FormatError::Version { found: 9, .. })));
        bytes[0] = b'X';
        assert_eq!(decode_tensors(&bytes), Err(FormatError::BadMagic));
        let mut wrong = Mlp::zeros(2, &[4], 1, OutputActivation::Linear);
        assert!(decode_params_into(&encode_params(&net), &mut wrong).is_err());
    }
}
