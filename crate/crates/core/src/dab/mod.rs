//! DAB frame cipher: block DCT, quality-scaled quantization, selective AES on
//! the low-frequency corner of each block, then a keyed shuffle of 32×32
//! coefficient tiles.
//!
//! The pipeline is fixed: pad → DCT → quantize → [`aes_coeff_layer`] →
//! [`shuffle_blocks`]. Decoding undoes each step in reverse and the result is
//! exactly what plain DCT → quantize → dequantize → IDCT would have produced,
//! since the crypto layers are lossless over quantized coefficients.

use alloc::vec::Vec;

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::Digest256;

mod aes_layer;
mod dct;
mod frame;
mod quant;
mod shuffle;
mod view;
pub mod wire;

pub use aes_layer::{aes_coeff_layer, CryptDirection, SELECTED};
pub use dct::{dct_matrix, forward_dct, inverse_dct, Block, Dct, DctMatrix};
pub use frame::{pad_edges, CoefficientPlane, FrameBuffer, BLOCK, TILE};
pub use quant::{dequantize, quant_matrix, quantize, QuantMatrix, BASE_QUANT};
pub use shuffle::{permutation_digest, shuffle_blocks, tile_permutation, unshuffle_blocks};
pub use view::{cipher_visualization, coefficient_low_bytes};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DabError {
    #[error("InvalidQuality: {0} is outside 1..=100")]
    InvalidQuality(u8),
    #[error("WeakKey: key material must be nonzero")]
    WeakKey,
    #[error("GeometryError: {0}")]
    Geometry(&'static str),
    #[error("WrongShuffleKey: shuffle seed does not reproduce the recorded permutation")]
    WrongShuffleKey,
    #[error("malformed cipher frame: {0}")]
    Malformed(&'static str),
}

/// Secrets for one enciphering session.
#[derive(Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DabKeyset {
    #[serde(with = "hex16")]
    pub aes_key: [u8; 16],
    #[serde(with = "hex16")]
    pub shuffle_seed: [u8; 16],
    pub quality: u8,
    pub frame_nonce_base: u64,
}

impl core::fmt::Debug for DabKeyset {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DabKeyset").field("quality", &self.quality).field("frame_nonce_base", &self.frame_nonce_base).finish_non_exhaustive()
    }
}

impl DabKeyset {
    pub fn new(aes_key: [u8; 16], shuffle_seed: [u8; 16], quality: u8, frame_nonce_base: u64) -> Result<Self, DabError> {
        let k = DabKeyset { aes_key, shuffle_seed, quality, frame_nonce_base };
        k.validate()?;
        Ok(k)
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R, quality: u8) -> Result<Self, DabError> {
        quant_matrix(quality)?;
        loop {
            let mut aes_key = [0u8; 16];
            let mut shuffle_seed = [0u8; 16];
            rng.fill_bytes(&mut aes_key);
            rng.fill_bytes(&mut shuffle_seed);
            if let Ok(k) = DabKeyset::new(aes_key, shuffle_seed, quality, rng.next_u64()) {
                return Ok(k);
            }
        }
    }

    pub fn validate(&self) -> Result<(), DabError> {
        quant_matrix(self.quality)?;
        if self.aes_key == [0; 16] || self.shuffle_seed == [0; 16] {
            return Err(DabError::WeakKey);
        }
        Ok(())
    }

    /// Counter origin for the AES layer of frame `frame_index`.
    pub fn frame_nonce(&self, frame_index: u64) -> [u8; 16] {
        (u128::from(self.frame_nonce_base.wrapping_add(frame_index)) << 64).to_be_bytes()
    }
}

mod hex16 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let s = alloc::string::String::deserialize(d)?;
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

/// A shuffled, partially encrypted coefficient plane with its header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CipherFrame {
    pub plane: CoefficientPlane,
    pub quality: u8,
    pub frame_index: u64,
    pub permutation_digest: Digest256,
}

/// DCT + quantization of a frame, padded to whole tiles. This is the codec
/// without any cryptography.
pub fn encode_plane(frame: &FrameBuffer, quality: u8) -> Result<CoefficientPlane, DabError> {
    let qm = quant_matrix(quality)?;
    let padded = pad_edges(frame, TILE);
    let (pw, ph) = (padded.width(), padded.height());
    let dct = Dct::default();
    let mut plane = CoefficientPlane {
        padded_width: pw,
        padded_height: ph,
        original_width: frame.width(),
        original_height: frame.height(),
        channels: frame.channels(),
        coefficients: alloc::vec![0i16; pw * ph * frame.channels()],
    };
    for c in 0..frame.channels() {
        let pixels = padded.plane(c);
        for by in 0..ph / BLOCK {
            for bx in 0..pw / BLOCK {
                let mut m = [[0.0; BLOCK]; BLOCK];
                for (u, row) in m.iter_mut().enumerate() {
                    let src = &pixels[(by * BLOCK + u) * pw + bx * BLOCK..][..BLOCK];
                    for (e, &p) in row.iter_mut().zip(src) {
                        *e = f64::from(p);
                    }
                }
                plane.write_block(c, bx, by, &quantize(&dct.forward(&m), &qm));
            }
        }
    }
    Ok(plane)
}

/// Dequantize + inverse DCT for every block, returning real-valued samples of
/// the padded plane, channel-planar.
pub(crate) fn reconstruct_samples(plane: &CoefficientPlane, quality: u8) -> Result<Vec<f64>, DabError> {
    let qm = quant_matrix(quality)?;
    let dct = Dct::default();
    let (pw, ph) = (plane.padded_width, plane.padded_height);
    let mut out = alloc::vec![0.0f64; pw * ph * plane.channels];
    for c in 0..plane.channels {
        for by in 0..plane.blocks_y() {
            for bx in 0..plane.blocks_x() {
                let m = dct.inverse(&dequantize(&plane.read_block(c, bx, by), &qm));
                for (u, row) in m.iter().enumerate() {
                    let start = (c * ph + by * BLOCK + u) * pw + bx * BLOCK;
                    out[start..start + BLOCK].copy_from_slice(row);
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`encode_plane`] up to quantization loss: samples are rounded,
/// clamped to `0..=255`, and the padding is cropped away.
pub fn decode_plane(plane: &CoefficientPlane, quality: u8) -> Result<FrameBuffer, DabError> {
    let samples = reconstruct_samples(plane, quality)?;
    let pixels = samples.iter().map(|&v| libm::round(v).clamp(0.0, 255.0) as u8).collect();
    let full = FrameBuffer::new(plane.padded_width, plane.padded_height, plane.channels, pixels)?;
    full.crop(plane.original_width, plane.original_height)
}

pub fn encipher_frame(frame: &FrameBuffer, keys: &DabKeyset, frame_index: u64) -> Result<CipherFrame, DabError> {
    keys.validate()?;
    let plane = encode_plane(frame, keys.quality)?;
    let locked = aes_coeff_layer(&plane, &keys.aes_key, &keys.frame_nonce(frame_index), CryptDirection::Encrypt)?;
    shuffle_blocks(&locked, &keys.shuffle_seed, frame_index, keys.quality)
}

/// Undoes the shuffle and the AES layer, yielding the quantized plane.
pub fn decipher_coefficients(cf: &CipherFrame, keys: &DabKeyset) -> Result<CoefficientPlane, DabError> {
    keys.validate()?;
    let locked = unshuffle_blocks(cf, &keys.shuffle_seed)?;
    aes_coeff_layer(&locked, &keys.aes_key, &keys.frame_nonce(cf.frame_index), CryptDirection::Decrypt)
}

pub fn decipher_frame(cf: &CipherFrame, keys: &DabKeyset) -> Result<FrameBuffer, DabError> {
    let plane = decipher_coefficients(cf, keys)?;
    decode_plane(&plane, cf.quality)
}
